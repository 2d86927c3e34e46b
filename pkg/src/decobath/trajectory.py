"""Time grids and trajectory containers shared by the model modules."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .qstate import ATOL_INTEGRATED, DensityMatrix2


@dataclass(frozen=True)
class TimeGrid:
    """A uniform time grid with ``steps`` intervals from t0 to t1.

    ``times`` has ``steps + 1`` points including both endpoints.
    """

    t0: float
    t1: float
    steps: int

    def __post_init__(self):
        if not (np.isfinite(self.t0) and np.isfinite(self.t1)):
            raise ValueError("grid endpoints must be finite")
        if not self.t1 > self.t0:
            raise ValueError(f"require t1 > t0, got [{self.t0}, {self.t1}]")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError(f"steps must be a positive integer, got {self.steps}")
        object.__setattr__(self, "steps", int(self.steps))

    @property
    def dt(self) -> float:
        return (self.t1 - self.t0) / self.steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t0, self.t1, self.steps + 1)

    def refined(self, factor: int) -> "TimeGrid":
        """Same span with ``factor`` times as many steps."""
        return TimeGrid(self.t0, self.t1, self.steps * int(factor))


@dataclass
class Trajectory:
    """Column-oriented time series, the unit of CSV export.

    ``columns`` maps a column name to an array of the same length as
    ``times``.  Population columns, when both are present, must sum to one
    within 1e-9 at every record.
    """

    times: np.ndarray
    columns: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.ndim != 1 or self.times.size < 1:
            raise ValueError("times must be a non-empty 1-d array")
        if self.times.size > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("times must be strictly increasing")
        for name, col in self.columns.items():
            col = np.asarray(col)
            if col.shape != self.times.shape:
                raise ValueError(
                    f"column {name!r} has shape {col.shape}, "
                    f"expected {self.times.shape}"
                )
            self.columns[name] = col
        if "rho00" in self.columns and "rho11" in self.columns:
            drift = np.max(np.abs(self.columns["rho00"] + self.columns["rho11"] - 1.0))
            if drift > ATOL_INTEGRATED:
                raise ValueError(f"populations do not sum to 1 (drift {drift:.3e})")

    def __len__(self) -> int:
        return self.times.size

    @property
    def column_names(self) -> list[str]:
        return ["t", *self.columns.keys()]

    def to_csv(self) -> str:
        """Render as CSV: header row, 17 significant digits, LF line endings.

        17 digits make the float round trip exact, so re-parsing an emitted
        file reproduces the trajectory bit for bit.
        """
        lines = [",".join(self.column_names)]
        cols = [self.times, *self.columns.values()]
        for i in range(self.times.size):
            lines.append(",".join(f"{float(c[i]):.17g}" for c in cols))
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        """Write :meth:`to_csv` output to ``path``; I/O errors carry the path."""
        try:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(self.to_csv())
        except OSError as exc:
            raise OSError(f"cannot write trajectory to {path!r}: {exc}") from exc

    @classmethod
    def read_csv(cls, path_or_text) -> "Trajectory":
        """Parse a CSV produced by :meth:`to_csv` (first column must be t)."""
        import io
        import os

        if isinstance(path_or_text, (str, os.PathLike)) and os.path.exists(path_or_text):
            with open(path_or_text, "r", encoding="utf-8") as fh:
                text = fh.read()
        else:
            text = str(path_or_text)
        lines = [ln for ln in text.splitlines() if ln.strip()]
        header = lines[0].split(",")
        if header[0] != "t":
            raise ValueError("first CSV column must be t")
        data = np.loadtxt(io.StringIO("\n".join(lines[1:])), delimiter=",", ndmin=2)
        return cls(data[:, 0], {name: data[:, j + 1] for j, name in enumerate(header[1:])})


@dataclass
class RhoTrajectory:
    """Density-matrix trajectory: times plus a stack of 2x2 matrices."""

    times: np.ndarray
    states: np.ndarray  # shape (len(times), 2, 2), complex

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=complex)
        if self.states.shape != (self.times.size, 2, 2):
            raise ValueError(
                f"states shape {self.states.shape} does not match "
                f"{self.times.size} time points"
            )

    def density_matrix(self, index: int, *, atol: float = ATOL_INTEGRATED) -> DensityMatrix2:
        return DensityMatrix2(self.states[index], atol=atol)

    @property
    def final(self) -> DensityMatrix2:
        return self.density_matrix(-1)

    def to_trajectory(self) -> Trajectory:
        """Standard column view: populations plus real/imaginary coherence."""
        return Trajectory(
            self.times,
            {
                "rho00": self.states[:, 0, 0].real.copy(),
                "rho11": self.states[:, 1, 1].real.copy(),
                "reCoh": self.states[:, 0, 1].real.copy(),
                "imCoh": self.states[:, 0, 1].imag.copy(),
            },
        )
