import math
from dataclasses import replace

import numpy as np
import pytest

from l1ident.dictionary import constant_mu_gram
from l1ident.exceptions import InvalidParameterError
from l1ident.experiment import (
    CSV_HEADER,
    Empirical,
    PhaseCell,
    PhaseGridConfig,
    agreement,
    boundary_csv,
    boundary_table,
    cell_seed,
    classify,
    figure1_config,
    load_config,
    phase_csv,
    read_gram_file,
    run_phase_diagram,
    write_phase_csv,
)
from l1ident.identifiability import Status
from l1ident.objective import DescentConfig

FAST = DescentConfig(max_iters=40)


def write_config(tmp_path, text):
    p = tmp_path / "grid.ini"
    p.write_text(text)
    return p


def test_load_config_full(tmp_path):
    (tmp_path / "g.txt").write_text("2\n1 0.3\n0.3 1\n")
    p = write_config(tmp_path, """
[grid]
K = 2
family = gram_file
gram_file = g.txt
mu_values = 0, 0.5, 1
sparsity_values = 0.2, 0.6
model_kind = bg
N = 50
batches = 3
seed = 7
margin_band = 0.02
[descent]
max_iters = 10
step0 = 0.05
""")
    cfg = load_config(p)
    assert cfg.K == 2 and cfg.model_kind == "BG" and cfg.N == 50 and cfg.batches == 3
    assert cfg.mu_values == (0.0, 0.5, 1.0) and cfg.sparsity_values == (0.2, 0.6)
    assert cfg.descent == DescentConfig(max_iters=10, step0=0.05)
    assert cfg.margin_band == 0.02
    assert cfg.gram(0.5).entries[0, 1] == pytest.approx(0.15)


@pytest.mark.parametrize("body,needle", [
    ("[grid]\nK = 4\nmu_values = 0.1\n", "sparsity_values"),
    ("[grid]\nK = 4\nmu_values =\nsparsity_values = 1\n", "mu_values must be nonempty"),
    ("[grid]\nK = 4\nmu_values = 0.1\nsparsity_values = 1\nerror_threshold_low = 0.5\n", "error_threshold"),
    ("[grid]\nK = 4\nfamily = spiral\nmu_values = 0.1\nsparsity_values = 1\n", "family"),
    ("[grid]\nK = 4\nmu_values = 0.1\nsparsity_values = 5\n", "s=5"),
    ("[other]\nK = 4\n", "[grid]"),
])
def test_load_config_errors(tmp_path, body, needle):
    with pytest.raises(InvalidParameterError) as info:
        load_config(write_config(tmp_path, body))
    assert needle in str(info.value)


def test_missing_config_file(tmp_path):
    with pytest.raises(InvalidParameterError):
        load_config(tmp_path / "absent.ini")


def test_read_gram_file(tmp_path):
    p = tmp_path / "g.txt"
    p.write_text("3\n1 0 0.2\n0 1 0\n0.2 0 1\n")
    assert read_gram_file(p).entries[0, 2] == 0.2
    p.write_text("3\n1 0\n0 1\n")
    with pytest.raises(InvalidParameterError):
        read_gram_file(p)
    p.write_text("2\n1 0.5\n0.4 1\n")
    with pytest.raises(InvalidParameterError):
        read_gram_file(p)


def test_classify_thresholds():
    assert classify([0.0, 0.001, 0.5], 1e-2, 1e-1) is Empirical.RECOVERED
    assert classify([0.2, 0.3, 0.0], 1e-2, 1e-1) is Empirical.NOT_RECOVERED
    assert classify([0.05], 1e-2, 1e-1) is Empirical.AMBIGUOUS


def test_cell_seeds_distinct():
    states = {tuple(cell_seed(1, i, j, b).generate_state(2)) for i in range(3) for j in range(3) for b in range(3)}
    assert len(states) == 27


def test_single_cell_one_row():
    cfg = PhaseGridConfig(K=4, family="constant_mu", mu_values=(0.1,), sparsity_values=(2,), model_kind="SG",
                          N=100, batches=1, descent=FAST)
    cells = run_phase_diagram(cfg, workers=1)
    text = phase_csv(cells, cfg.margin_band)
    lines = text.splitlines()
    assert lines[0] == CSV_HEADER
    assert len(lines) == 3 and lines[-1].startswith("# agreement=")
    mu, sp, b, err, it, conv, margin, status = lines[1].split(",")
    assert (mu, sp, b, status) == ("0.1", "2", "0", "Identifiable")
    assert float(margin) == pytest.approx(1 - 1 / 3 - math.sqrt(2) * 0.1)


def test_grid_rows_and_determinism(tmp_path):
    cfg = PhaseGridConfig(K=4, family="constant_mu", mu_values=(0.0, 0.4, 0.8), sparsity_values=(1, 3),
                          model_kind="SG", N=60, batches=2, seed=3, descent=FAST)
    a = phase_csv(run_phase_diagram(cfg, workers=1), 0.05)
    b = phase_csv(run_phase_diagram(cfg, workers=2), 0.05)
    assert a == b
    assert len(a.splitlines()) == 1 + 3 * 2 * 2 + 1
    keys = [tuple(r.split(",")[:3]) for r in a.splitlines()[1:-1]]
    assert keys == [(m, s, str(k)) for m in ("0", "0.4", "0.8") for s in ("1", "3") for k in range(2)]
    c = phase_csv(run_phase_diagram(replace(cfg, seed=4), workers=1), 0.05)
    assert c != a
    out = tmp_path / "x.csv"
    write_phase_csv(run_phase_diagram(cfg, workers=1), 0.05, out)
    assert out.read_text() == a
    with pytest.raises(InvalidParameterError):
        write_phase_csv([], 0.05, tmp_path / "missing" / "x.csv")


def test_agreement_counts_only_decided_cells():
    mk = lambda margin, st, emp: PhaseCell(0, 1, [0], [1], [True], margin, st, emp)  # noqa: E731
    cells = [mk(0.3, Status.IDENTIFIABLE, Empirical.RECOVERED),
             mk(-0.3, Status.NOT_IDENTIFIABLE, Empirical.AMBIGUOUS),
             mk(0.01, Status.IDENTIFIABLE, Empirical.NOT_RECOVERED)]
    assert agreement(cells, 0.05) == (0.5, 2)
    frac, n = agreement(cells[2:], 0.05)
    assert math.isnan(frac) and n == 0
    assert phase_csv(cells, 0.05).splitlines()[-1] == "# agreement=0.5 cells=2 margin_band=0.05"


def test_figure1_grid_shape():
    for kind in ("SG", "BG"):
        cfg = figure1_config(kind)
        assert len(cfg.mu_values) == 20 and len(cfg.sparsity_values) == 10
        assert cfg.N == 2000 and cfg.batches == 10 and cfg.K == 10
        assert cfg.mu_values[-1] == 0.95


def test_boundary_table_examples():
    rows = boundary_table(2, "constant_mu", "BG", [0.3])
    assert rows[0].critical_mu == pytest.approx(0.7)
    assert boundary_table(10, "constant_mu", "SG", [4])[0].critical_mu == pytest.approx(1 / 3)
    dense = boundary_table(4, "constant_mu", "SG", [4])[0]
    assert math.isnan(dense.critical_mu) and "never" in dense.note
    mm = boundary_table(6, "minimal_mu", "BG", [0.3, 0.6])
    assert [r.critical_mu for r in mm] == pytest.approx([0.7, 0.4], abs=1e-5)
    gf = boundary_table(4, "gram_file", "SG", [2], gram=constant_mu_gram(4, 0.9))
    direct = boundary_table(4, "constant_mu", "SG", [2])[0].critical_mu
    assert gf[0].critical_mu * 0.9 == pytest.approx(direct, abs=1e-5)
    bad = boundary_table(4, "constant_mu", "SG", [7])[0]
    assert math.isnan(bad.critical_mu) and bad.note
    text = boundary_csv(rows)
    assert text.splitlines() == ["sparsity,critical_mu,note", "0.3,0.7,"]


def test_larger_k_boundary_lower():
    small = boundary_table(3, "constant_mu", "BG", np.linspace(0.1, 0.9, 9))
    large = boundary_table(12, "constant_mu", "BG", np.linspace(0.1, 0.9, 9))
    assert all(b.critical_mu < a.critical_mu for a, b in zip(small, large))
