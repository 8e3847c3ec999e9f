"""Monte Carlo phase diagrams: grid configuration, cell execution, CSV output."""
from __future__ import annotations

import configparser
import enum
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .dictionary import GramMatrix, constant_mu_gram, dictionary_from_gram, minimal_mu_gram
from .exceptions import InvalidParameterError, SizeCapError
from .identifiability import (
    Method,
    Status,
    phase_boundary_constant_mu,
    phase_boundary_general,
    population_verdict,
)
from .models import BG, SG, SparsityModel, generate_signals
from .objective import DescentConfig, manifold_descent

CSV_HEADER = "mu,sparsity,batch,final_error,iterations,converged,theory_margin,theory_status"
FAMILIES = ("constant_mu", "minimal_mu", "gram_file")


class Empirical(str, enum.Enum):
    RECOVERED = "Recovered"
    NOT_RECOVERED = "NotRecovered"
    AMBIGUOUS = "Ambiguous"


def fmt(x) -> str:
    """Twelve significant digits, as used in every CSV cell."""
    return f"{float(x):.12g}"


def read_gram_file(path) -> GramMatrix:
    """Parse a Gram file: ``K`` on the first line, then ``K`` rows of ``K`` reals."""
    lines = [ln.strip() for ln in Path(path).read_text().splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise InvalidParameterError(f"{path}: empty Gram file")
    try:
        K = int(lines[0])
        rows = [[float(v) for v in ln.split()] for ln in lines[1:]]
    except ValueError as exc:
        raise InvalidParameterError(f"{path}: {exc}") from exc
    if K < 1 or len(rows) != K or any(len(r) != K for r in rows):
        raise InvalidParameterError(f"{path}: expected {K} rows of {K} values after the size line")
    return GramMatrix(np.array(rows))


@dataclass(frozen=True)
class PhaseGridConfig:
    """A (collinearity x sparsity) grid with its Monte Carlo settings.

    ``mu_values`` are inner products for the constant/minimal families and
    interpolation weights ``t`` in ``I + t (M_file - I)`` for ``gram_file``.
    """

    K: int
    family: str
    mu_values: tuple
    sparsity_values: tuple
    model_kind: str
    N: int = 2000
    batches: int = 10
    seed: int = 0
    descent: DescentConfig = field(default_factory=DescentConfig)
    error_threshold_low: float = 1e-2
    error_threshold_high: float = 1e-1
    margin_band: float = 0.05
    gram_file: str | None = None

    def __post_init__(self):
        problems = []
        if self.K < 2:
            problems.append("K must be at least 2")
        if self.family not in FAMILIES:
            problems.append(f"family must be one of {', '.join(FAMILIES)}")
        if self.family == "gram_file" and not self.gram_file:
            problems.append("gram_file family needs a gram_file path")
        if not self.mu_values:
            problems.append("mu_values must be nonempty")
        if not self.sparsity_values:
            problems.append("sparsity_values must be nonempty")
        if self.model_kind not in ("SG", "BG"):
            problems.append("model_kind must be SG or BG")
        if self.N < 1:
            problems.append("N must be positive")
        if self.batches < 1:
            problems.append("batches must be positive")
        if not (0 < self.error_threshold_low < self.error_threshold_high):
            problems.append("need 0 < error_threshold_low < error_threshold_high")
        if self.margin_band < 0:
            problems.append("margin_band must be nonnegative")
        if problems:
            raise InvalidParameterError("invalid config: " + "; ".join(problems))
        for s in self.sparsity_values:
            self.model(s).validate(self.K)

    def model(self, sparsity) -> SparsityModel:
        if self.model_kind == "SG":
            if float(sparsity) != int(sparsity):
                raise InvalidParameterError(f"SG sparsity must be an integer, got {sparsity}")
            return SG(int(sparsity))
        return BG(float(sparsity))

    def gram(self, mu) -> GramMatrix:
        if self.family == "constant_mu":
            return constant_mu_gram(self.K, mu)
        if self.family == "minimal_mu":
            return minimal_mu_gram(self.K, mu)
        base = read_gram_file(self.gram_file).entries
        if base.shape[0] != self.K:
            raise InvalidParameterError(f"gram_file has K={base.shape[0]}, config says K={self.K}")
        return GramMatrix(np.eye(self.K) + mu * (base - np.eye(self.K)))


def _floats(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def load_config(path) -> PhaseGridConfig:
    """Read an INI config with ``[grid]`` and optional ``[descent]`` sections."""
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise InvalidParameterError(f"cannot read config file {path}")
    if "grid" not in cp:
        raise InvalidParameterError(f"{path}: missing [grid] section")
    g = cp["grid"]
    try:
        kind = g.get("model_kind", "SG").strip().upper()
        sp = _floats(g["sparsity_values"])
        if kind == "SG":
            sp = tuple(int(v) if v == int(v) else v for v in sp)
        d = cp["descent"] if "descent" in cp else {}
        descent = DescentConfig(
            max_iters=int(d.get("max_iters", 5000)),
            step0=float(d.get("step0", 0.1)),
            stop_tol=float(d.get("stop_tol", 1e-8)),
            singular_guard=float(d.get("singular_guard", 1e-8)),
        )
        gram_file = g.get("gram_file")
        if gram_file and not os.path.isabs(gram_file):
            gram_file = os.path.join(os.path.dirname(os.path.abspath(path)), gram_file)
        return PhaseGridConfig(
            K=int(g["K"]),
            family=g.get("family", "constant_mu").strip(),
            mu_values=_floats(g["mu_values"]),
            sparsity_values=sp,
            model_kind=kind,
            N=int(g.get("N", 2000)),
            batches=int(g.get("batches", 10)),
            seed=int(g.get("seed", 0)),
            descent=descent,
            error_threshold_low=float(g.get("error_threshold_low", 1e-2)),
            error_threshold_high=float(g.get("error_threshold_high", 1e-1)),
            margin_band=float(g.get("margin_band", 0.05)),
            gram_file=gram_file,
        )
    except KeyError as exc:
        raise InvalidParameterError(f"{path}: missing required field {exc.args[0]}") from exc
    except ValueError as exc:
        raise InvalidParameterError(f"{path}: {exc}") from exc


@dataclass
class PhaseCell:
    mu: float
    sparsity: float
    batch_errors: list
    batch_iterations: list
    batch_converged: list
    theory_margin: float
    theory_status: Status
    empirical_status: Empirical


def classify(errors, low, high) -> Empirical:
    med = float(np.median(errors))
    if med < low:
        return Empirical.RECOVERED
    if med > high:
        return Empirical.NOT_RECOVERED
    return Empirical.AMBIGUOUS


def cell_seed(seed: int, mu_index: int, sparsity_index: int, batch: int) -> np.random.SeedSequence:
    """Independent substream per (cell, batch)."""
    return np.random.SeedSequence(seed, spawn_key=(mu_index, sparsity_index, batch))


def _run_batch(args):
    cfg, mu_i, sp_i, b = args
    M0 = cfg.gram(cfg.mu_values[mu_i])
    D0 = dictionary_from_gram(M0)
    model = cfg.model(cfg.sparsity_values[sp_i])
    batch = generate_signals(D0, model, cfg.N, np.random.default_rng(cell_seed(cfg.seed, mu_i, sp_i, b)))
    tr = manifold_descent(D0, batch, cfg.descent, D0)
    return tr.final_error, tr.iterations, tr.converged


def theory(cfg: PhaseGridConfig, mu, sparsity):
    """Exact-dual verdict when within the size caps, else the bounds verdict."""
    M0, model = cfg.gram(mu), cfg.model(sparsity)
    try:
        return population_verdict(M0, model, Method.EXACT)
    except SizeCapError:
        return population_verdict(M0, model, Method.BOUNDS)


def run_phase_diagram(cfg: PhaseGridConfig, workers: int | None = None) -> list[PhaseCell]:
    """Run every (mu, sparsity, batch) descent; cells come back in grid order."""
    tasks = [(cfg, i, j, b) for i in range(len(cfg.mu_values))
             for j in range(len(cfg.sparsity_values)) for b in range(cfg.batches)]
    workers = workers or os.cpu_count() or 1
    if workers <= 1:
        results = [_run_batch(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_batch, tasks, chunksize=max(1, len(tasks) // (8 * workers))))
    cells = []
    it = iter(results)
    for mu in cfg.mu_values:
        for sp in cfg.sparsity_values:
            runs = [next(it) for _ in range(cfg.batches)]
            v = theory(cfg, mu, sp)
            errors = [r[0] for r in runs]
            cells.append(PhaseCell(mu, sp, errors, [r[1] for r in runs], [r[2] for r in runs], v.margin,
                                   v.status, classify(errors, cfg.error_threshold_low, cfg.error_threshold_high)))
    return cells


def agreement(cells, margin_band) -> tuple[float, int]:
    """Fraction of cells with ``|margin| > margin_band`` whose empirical status
    matches the theory (Recovered with Identifiable, NotRecovered with
    NotIdentifiable), and the number of such cells."""
    decided = [c for c in cells if abs(c.theory_margin) > margin_band]
    if not decided:
        return math.nan, 0
    match = {Status.IDENTIFIABLE: Empirical.RECOVERED, Status.NOT_IDENTIFIABLE: Empirical.NOT_RECOVERED}
    hits = sum(match.get(c.theory_status) is c.empirical_status for c in decided)
    return hits / len(decided), len(decided)


def phase_csv(cells, margin_band) -> str:
    lines = [CSV_HEADER]
    for c in cells:
        for b, (e, n, conv) in enumerate(zip(c.batch_errors, c.batch_iterations, c.batch_converged)):
            lines.append(",".join([fmt(c.mu), fmt(c.sparsity), str(b), fmt(e), str(n), str(int(conv)),
                                   fmt(c.theory_margin), c.theory_status.value]))
    frac, n = agreement(cells, margin_band)
    lines.append(f"# agreement={fmt(frac)} cells={n} margin_band={fmt(margin_band)}")
    return "\n".join(lines) + "\n"


def write_phase_csv(cells, margin_band, path) -> None:
    text = phase_csv(cells, margin_band)
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise InvalidParameterError(f"cannot write output {path}: {exc.strerror}") from exc


def figure1_config(model_kind: str = "SG", **overrides) -> PhaseGridConfig:
    """The K=10 constant inner-product grid: mu in 0..0.95 step 0.05, ten batches of 2000."""
    mus = tuple(round(0.05 * i, 2) for i in range(20))
    sp = tuple(range(1, 11)) if model_kind == "SG" else tuple(round(0.1 * i, 1) for i in range(1, 11))
    cfg = PhaseGridConfig(K=10, family="constant_mu", mu_values=mus, sparsity_values=sp, model_kind=model_kind)
    return replace(cfg, **overrides)


@dataclass
class BoundaryRow:
    sparsity: float
    critical_mu: float
    note: str = ""


def boundary_table(K: int, family: str, model_kind: str, sparsity_values, gram: GramMatrix | None = None,
                   bracket=(0.0, 1.0 - 1e-9)) -> list[BoundaryRow]:
    """Critical collinearity per sparsity value.

    The constant-mu family uses its closed form; other families bisect the
    exact-dual margin over ``bracket``. Failures are reported per row.
    """
    rows = []
    for sp in sparsity_values:
        model = SG(int(sp)) if model_kind.upper() == "SG" else BG(float(sp))
        try:
            model.validate(K)
            if model.is_dense(K):
                rows.append(BoundaryRow(sp, math.nan, "non-sparse model: never identifiable"))
                continue
            if family == "constant_mu":
                rows.append(BoundaryRow(sp, phase_boundary_constant_mu(K, model)))
                continue
            if family == "minimal_mu":
                fam = lambda t: minimal_mu_gram(K, t)  # noqa: E731
            elif family == "gram_file":
                if gram is None:
                    raise InvalidParameterError("gram_file family needs a Gram matrix")
                base = gram.entries
                fam = lambda t: GramMatrix(np.eye(K) + t * (base - np.eye(K)))  # noqa: E731
            else:
                raise InvalidParameterError(f"unknown family {family!r}")
            rows.append(BoundaryRow(sp, phase_boundary_general(fam, model, bracket)))
        except (InvalidParameterError, ValueError) as exc:
            rows.append(BoundaryRow(sp, math.nan, str(exc)))
    return rows


def boundary_csv(rows) -> str:
    lines = ["sparsity,critical_mu,note"]
    for r in rows:
        note = r.note.replace(",", ";")
        lines.append(f"{fmt(r.sparsity)},{fmt(r.critical_mu)},{note}")
    return "\n".join(lines) + "\n"
