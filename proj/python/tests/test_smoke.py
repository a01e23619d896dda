import json
import math

import numpy as np
import pytest

import ggan

LABELED = """sample_id,rs1,rs2,rs3,rs4,label
a,0,1,2,0,DF
b,2,1,0,1,SD
c,0,0,1,2,DF
d,1,2,2,0,SD
e,0,1,1,1,DF
f,2,2,0,1,SD
g,1,0,0,2,DF
h,2,1,2,0,SD
i,0,0,1,1,DF
j,1,2,1,0,SD
"""


def unlabeled_text(rows=20):
    lines = ["sample_id,rs1,rs2,rs3,rs4"]
    for k in range(rows):
        lines.append(f"u{k},{k % 3},{(k // 3) % 3},{(k * 7) % 3},{(k + 1) % 3}")
    return "\n".join(lines) + "\n"


def test_parse_and_genotypes():
    m = ggan.parse_genotype_csv(LABELED, has_labels=True)
    assert m.shape == (10, 4)
    assert m.labels[:2] == ["DF", "SD"]
    g = m.genotypes()
    assert g.shape == (10, 4)
    assert g[0].tolist() == [0, 1, 2, 0]
    assert ggan.parse_genotype_csv(ggan.write_genotype_csv(m), has_labels=True).genotypes().tolist() == g.tolist()


def test_parse_error_carries_exit_code():
    with pytest.raises(ggan.GganError) as info:
        ggan.parse_genotype_csv("sample_id,rs1\na,7\n")
    assert info.value.exit_code == 2


def test_frequencies_and_afd():
    m = ggan.parse_genotype_csv(LABELED, has_labels=True)
    freqs = ggan.allele_frequencies(m)
    for f in freqs.values():
        assert math.isclose(sum(f.values()), 1.0)
    distances = dict(ggan.afd(m, m))
    assert all(v == 0.0 for v in distances.values())
    assert ggan.select_snps_by_afd(list(distances.items()), 0.1) == ["rs1", "rs2", "rs3", "rs4"]


def test_architecture_dumps():
    assert "Conv1D k=3 relu (12,48)" in ggan.describe_discriminator(12)
    assert ggan.describe_generator(96).splitlines()[1] == "Dense relu (90)"
    assert ggan.parameter_counts(12) == (8236, 5940)
    assert math.isclose(ggan.cross_entropy([1.0, 0.0], [0.5, 0.5]), math.log(2.0))


def test_train_generate_evaluate(tmp_path):
    labeled = ggan.parse_genotype_csv(LABELED, has_labels=True)
    unlabeled = ggan.parse_genotype_csv(unlabeled_text())
    config = json.dumps({"n_labeled_batch": 4, "n_unsup_batch": 8, "n_gen_batch": 8, "noise_dim": 6, "epochs": 3, "seed": 1})
    model = ggan.train(config, labeled, unlabeled, ["rs1", "rs2", "rs3", "rs4"])
    assert model.epoch == 3
    assert len(model.history) == 3
    assert all(math.isfinite(r["L_sup"]) for r in model.history)

    fakes = model.generate(5, seed=2)
    assert fakes.shape == (5, 4, 1)
    assert np.all((fakes >= 0.0) & (fakes <= 1.0))
    assert np.array_equal(fakes, model.generate(5, seed=2))

    label_p, real_p = model.discriminate(fakes[:, :, 0])
    assert np.allclose(label_p.sum(axis=1), 1.0)
    assert np.allclose(real_p.sum(axis=1), 1.0)

    report = model.evaluate(labeled, unlabeled, seed=3)
    assert set(report["t2"]) == {"acc1", "acc2", "n_passed"}
    assert 0.0 <= report["t1"]["acc_labeled"] <= 1.0

    path = str(tmp_path / "model.ggan")
    model.save(path)
    again = ggan.load_checkpoint(path)
    assert again.history == model.history
    assert np.array_equal(again.generate(5, seed=2), fakes)


def test_cli_passthrough(tmp_path):
    code, out, _ = ggan.run_cli(["--version"])
    assert code == 0
    assert ggan.__version__ in out
    code, _, _ = ggan.run_cli(["generate", str(tmp_path / "missing.ggan"), str(tmp_path / "x.csv"), "--count", "0"])
    assert code == 1
