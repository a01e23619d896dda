"""Semi-supervised GAN for SNP genotype profiles."""

from ._ggan import (
    GenotypeMatrix,
    GganError,
    Model,
    __version__,
    afd,
    allele_frequencies,
    cross_entropy,
    default_config,
    describe_discriminator,
    describe_generator,
    load_checkpoint,
    parameter_counts,
    parse_genotype_csv,
    read_genotype_csv,
    run_cli,
    select_snps_by_afd,
    train,
    write_genotype_csv,
)


def _exit_code(self):
    return self.args[1] if len(self.args) > 1 else 1


GganError.exit_code = property(_exit_code)

__all__ = [
    "GenotypeMatrix",
    "GganError",
    "Model",
    "__version__",
    "afd",
    "allele_frequencies",
    "cross_entropy",
    "default_config",
    "describe_discriminator",
    "describe_generator",
    "load_checkpoint",
    "parameter_counts",
    "parse_genotype_csv",
    "read_genotype_csv",
    "run_cli",
    "select_snps_by_afd",
    "train",
    "write_genotype_csv",
]
