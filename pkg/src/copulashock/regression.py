"""Quadratic corner-regression surrogate for full copula grids.

The mass of every cell outside a chosen corner block is modelled as a
positive-semidefinite quadratic form of the corner masses:

    mass[cell] ~ x' Sigma_cell x,   x = corner masses, Sigma_cell >= 0.

Fitting one cell is a nonlinear least-squares problem over the Cholesky
factor L of Sigma_cell = L L', which enforces the PSD constraint by
construction; the factor is full so the parameterisation can reach any
PSD matrix. Given a fitted model, a full grid is reconstructed from the
corner alone: the corner keeps its observed masses, predictions fill the
rest and are rescaled to the leftover mass.
"""

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .copula import CopulaGrid
from .data import ReturnsTable
from .indicator import IndicatorSeries, corner_block, indicator, window_grids

__all__ = [
    "CornerSpec",
    "QuadraticCellModel",
    "CopulaModel",
    "extract_training_set",
    "fit_cell_model",
    "fit_copula_model",
    "predict_copula",
    "estimate_for_table",
    "indicator_from_model",
    "save_model",
    "load_model",
]


@dataclass(frozen=True)
class CornerSpec:
    """Which corner block of an m x m grid is observed."""

    m: int = 10
    corner: str = "lower-left"
    side: int = 3

    def __post_init__(self):
        corner_block(self.m, self.corner, self.side)  # validates

    @property
    def n_inputs(self) -> int:
        return self.side * self.side

    @property
    def n_targets(self) -> int:
        return self.m * self.m - self.n_inputs

    def mask(self) -> np.ndarray:
        out = np.zeros((self.m, self.m), dtype=bool)
        rows, cols = corner_block(self.m, self.corner, self.side)
        out[rows, cols] = True
        return out

    def corner_values(self, mass: np.ndarray) -> np.ndarray:
        """Corner masses in row-major block order."""
        rows, cols = corner_block(self.m, self.corner, self.side)
        return np.ascontiguousarray(mass[rows, cols]).ravel()

    def target_cells(self) -> list:
        """All non-corner cells in row-major grid order."""
        mask = self.mask()
        return [
            (i, j)
            for i in range(self.m)
            for j in range(self.m)
            if not mask[i, j]
        ]


@dataclass(frozen=True)
class QuadraticCellModel:
    """PSD quadratic form predicting one cell from the corner masses."""

    target: tuple
    chol: np.ndarray = field(repr=False)
    fit_residual: float

    @property
    def sigma(self) -> np.ndarray:
        return self.chol @ self.chol.T

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        z = x @ self.chol
        return (z * z).sum(axis=1)


@dataclass(frozen=True)
class CopulaModel:
    """One fitted quadratic model per non-corner cell."""

    spec: CornerSpec
    cells: list
    n_train: int
    window_k: int
    dataset: str = ""

    def __post_init__(self):
        want = self.spec.target_cells()
        got = [c.target for c in self.cells]
        if got != want:
            raise ValueError("cell models must cover all non-corner cells in order")


def extract_training_set(grids, spec: CornerSpec):
    """Stack corner inputs and non-corner targets of a grid collection."""
    grids = list(grids)
    if not grids:
        raise ValueError("need at least one grid")
    xs = []
    ys = []
    mask = spec.mask().ravel()
    for g in grids:
        mass = g.mass if isinstance(g, CopulaGrid) else np.asarray(g)
        if mass.shape != (spec.m, spec.m):
            raise ValueError("grid resolution does not match the corner spec")
        xs.append(spec.corner_values(mass))
        ys.append(mass.ravel()[~mask])
    return np.vstack(xs), np.vstack(ys)


def _unpack(params: np.ndarray, s: int, tril) -> np.ndarray:
    chol = np.zeros((s, s))
    chol[tril] = params
    return chol


def fit_cell_model(
    X: np.ndarray,
    y: np.ndarray,
    target=(0, 0),
    ftol: float = 1e-12,
    max_nfev: int = 1000,
    init_scale: float = 0.1,
    return_history: bool = False,
):
    """Fit one cell's PSD quadratic form by trust-region least squares.

    Stops when the relative cost decrease falls below ``ftol`` or after
    ``max_nfev`` evaluations. With ``return_history`` the costs at
    accepted iterates are returned as well (useful for checking that the
    solver only ever moves downhill).
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("fit inputs must be finite")
    n, s = X.shape
    if y.shape != (n,):
        raise ValueError("target vector length does not match X")
    tril = np.tril_indices(s)
    rows, cols = tril
    if n < s * (s + 1) // 2:
        warnings.warn(
            f"only {n} rows for {s * (s + 1) // 2} parameters; "
            "fit is under-determined",
            stacklevel=2,
        )

    cache = {}
    history = []

    def fun(params):
        chol = _unpack(params, s, tril)
        z = X @ chol
        r = y - (z * z).sum(axis=1)
        cache[params.tobytes()] = float(r @ r)
        return r

    def jac(params):
        # jac is evaluated only at accepted iterates, so the cached cost
        # sequence here is the accepted-cost trajectory
        history.append(cache.get(params.tobytes(), math.nan))
        chol = _unpack(params, s, tril)
        z = X @ chol
        return -2.0 * X[:, rows] * z[:, cols]

    p0 = _unpack_init(s, init_scale)[tril]
    # the trust-region boundary handling divides by zero benignly when a
    # step lands exactly on the region edge
    with np.errstate(divide="ignore", invalid="ignore"):
        res = least_squares(
            fun,
            p0,
            jac=jac,
            method="trf",
            ftol=ftol,
            xtol=None,
            gtol=None,
            max_nfev=max_nfev,
        )
    if not (np.isfinite(res.cost) and np.all(np.isfinite(res.x))):
        raise RuntimeError(f"cell {target} fit diverged")
    model = QuadraticCellModel(
        target=tuple(target),
        chol=_unpack(res.x, s, tril),
        fit_residual=float(2.0 * res.cost),
    )
    if return_history:
        return model, history
    return model


def _unpack_init(s: int, scale: float) -> np.ndarray:
    return np.eye(s) * scale


def fit_copula_model(
    grids,
    spec: CornerSpec = CornerSpec(),
    window_k: int = 60,
    workers: int = 1,
    dataset: str = "",
    progress=None,
) -> CopulaModel:
    """Fit every non-corner cell of the grid against the corner block."""
    X, Y = extract_training_set(grids, spec)
    cells = spec.target_cells()

    def one(idx):
        return fit_cell_model(X, Y[:, idx], target=cells[idx])

    fitted = []
    if workers <= 1:
        for idx in range(len(cells)):
            fitted.append(one(idx))
            if progress is not None:
                progress(idx + 1, len(cells))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for idx, mdl in enumerate(pool.map(one, range(len(cells)))):
                fitted.append(mdl)
                if progress is not None:
                    progress(idx + 1, len(cells))
    return CopulaModel(
        spec=spec,
        cells=fitted,
        n_train=X.shape[0],
        window_k=window_k,
        dataset=dataset,
    )


def predict_copula(model: CopulaModel, x, window_end=None) -> CopulaGrid:
    """Reconstruct a full grid from observed corner masses.

    The corner keeps ``x`` verbatim; predicted cells are rescaled so the
    grid sums to one. If every prediction is zero the leftover mass is
    spread uniformly over the non-corner cells.
    """
    spec = model.spec
    x = np.ascontiguousarray(x, dtype=np.float64).ravel()
    if x.shape != (spec.n_inputs,):
        raise ValueError(
            f"corner vector must have {spec.n_inputs} entries, got {x.shape[0]}"
        )
    if np.any(x < 0.0):
        raise ValueError("corner masses must be nonnegative")
    total_x = float(x.sum())
    if total_x > 1.0 + 1e-9:
        raise ValueError(f"corner masses sum to {total_x!r}, beyond 1")
    if total_x > 1.0:
        x = x / total_x
        total_x = 1.0
    remaining = 1.0 - total_x

    raw = np.array([c.predict(x)[0] for c in model.cells])
    total_raw = float(raw.sum())
    if total_raw > 0.0:
        filled = raw * (remaining / total_raw)
    else:
        filled = np.full(spec.n_targets, remaining / spec.n_targets)

    mass = np.empty(spec.m * spec.m)
    mask = spec.mask().ravel()
    corner_flat = np.zeros((spec.m, spec.m))
    rows, cols = corner_block(spec.m, spec.corner, spec.side)
    corner_flat[rows, cols] = x.reshape(spec.side, spec.side)
    mass[mask] = corner_flat.ravel()[mask]
    mass[~mask] = filled
    return CopulaGrid(
        m=spec.m,
        mass=mass.reshape(spec.m, spec.m),
        ret_thresholds=None,
        vol_thresholds=None,
        sample_count=0,
        window_end=window_end,
    )


def estimate_for_table(
    model: CopulaModel,
    table: ReturnsTable,
    samples: int = 500_000,
    seed: int = 0,
    binning: str = "rank",
    workers: int = 1,
    progress=None,
) -> list:
    """Predicted grid per window, observing only each window's corner."""
    grids = window_grids(
        table,
        k=model.window_k,
        m=model.spec.m,
        samples=samples,
        seed=seed,
        binning=binning,
        workers=workers,
        progress=progress,
    )
    return [
        predict_copula(model, model.spec.corner_values(g.mass), window_end=g.window_end)
        for g in grids
    ]


def indicator_from_model(
    model: CopulaModel,
    table: ReturnsTable,
    samples: int = 500_000,
    band_fraction: float = 0.10,
    seed: int = 0,
    binning: str = "rank",
    workers: int = 1,
    progress=None,
) -> IndicatorSeries:
    """Rolling indicator computed on corner-reconstructed grids."""
    est = estimate_for_table(
        model,
        table,
        samples=samples,
        seed=seed,
        binning=binning,
        workers=workers,
        progress=progress,
    )
    values = np.array([indicator(g, band_fraction) for g in est])
    return IndicatorSeries(dates=[g.window_end for g in est], values=values)


def _fmt(v: float) -> str:
    return "%.17g" % v


def save_model(model: CopulaModel, path):
    """Write a fitted model as text; one line per cell."""
    spec = model.spec
    lines = [
        "# copulashock quadratic corner model",
        "# m=%d corner=%s side=%d k=%d n_train=%d dataset=%s"
        % (
            spec.m,
            spec.corner,
            spec.side,
            model.window_k,
            model.n_train,
            model.dataset or "none",
        ),
        "# columns: i,j,residual,then cholesky rows (lower triangle, row-major)",
    ]
    for cell in model.cells:
        s = spec.side * spec.side
        tril = np.tril_indices(s)
        vals = cell.chol[tril]
        lines.append(
            "%d,%d,%s,%s"
            % (
                cell.target[0],
                cell.target[1],
                _fmt(cell.fit_residual),
                ",".join(_fmt(v) for v in vals),
            )
        )
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path) -> CopulaModel:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if len(lines) < 2 or not lines[1].startswith("# "):
        raise ValueError(f"{path}: missing model header")
    meta = {}
    for tok in lines[1][2:].split():
        key, _, val = tok.partition("=")
        meta[key] = val
    try:
        spec = CornerSpec(
            m=int(meta["m"]), corner=meta["corner"], side=int(meta["side"])
        )
        window_k = int(meta["k"])
        n_train = int(meta["n_train"])
    except (KeyError, ValueError):
        raise ValueError(f"{path}: bad model header {lines[1]!r}") from None
    dataset = meta.get("dataset", "none")
    dataset = "" if dataset == "none" else dataset
    s = spec.n_inputs
    tril = np.tril_indices(s)
    nparams = s * (s + 1) // 2
    cells = []
    for ln in lines:
        if ln.startswith("#"):
            continue
        parts = ln.split(",")
        if len(parts) != 3 + nparams:
            raise ValueError(f"{path}: bad cell line {ln[:40]!r}")
        chol = np.zeros((s, s))
        chol[tril] = [float(v) for v in parts[3:]]
        cells.append(
            QuadraticCellModel(
                target=(int(parts[0]), int(parts[1])),
                chol=chol,
                fit_residual=float(parts[2]),
            )
        )
    return CopulaModel(
        spec=spec,
        cells=cells,
        n_train=n_train,
        window_k=window_k,
        dataset=dataset,
    )
