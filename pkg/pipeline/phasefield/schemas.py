import math

from ninja import Schema
from pydantic import ConfigDict, Field, model_validator


class PhaseParams(Schema):
    """
    Parameters of the degenerate-mobility Cahn-Hilliard solver.

    Domain lengths default to pixel units (lx = nx, ly = ny). epsilon, dt, B and S
    are derived from the cell size when left unset, so a validated instance always
    carries concrete numbers.
    """

    model_config = ConfigDict(extra="forbid")

    nx: int = Field(64, ge=4)
    ny: int = Field(256, ge=4)
    lx: float | None = Field(None, gt=0)
    ly: float | None = Field(None, gt=0)
    epsilon: float | None = Field(None, gt=0)
    dt: float | None = Field(None, gt=0)
    B: float | None = Field(None, ge=0)
    S: float | None = Field(None, ge=0)
    steady_tol: float = Field(1e-6, gt=0)
    max_steps: int = Field(20000, ge=1)
    check_every: int = Field(100, ge=1)
    max_escalations: int = Field(3, ge=0)
    smoothing_iters: int = Field(20, ge=0)
    smoothing_dt_factor: float = Field(0.01, gt=0)

    @model_validator(mode="after")
    def resolve_defaults(self):
        if self.lx is None:
            self.lx = float(self.nx)
        if self.ly is None:
            self.ly = float(self.ny)
        h = self.cell_size
        if self.epsilon is None:
            self.epsilon = 4.0 * h
        if self.epsilon < 3.0 * h:
            raise ValueError(
                f"epsilon={self.epsilon} resolves the interface by fewer than 3 cells (cell size {h})"
            )
        if self.dt is None:
            self.dt = 0.1 * h**4 / (self.mobility_scale * self.epsilon)
        if self.B is None:
            self.B = self.mobility_scale * self.epsilon
        if self.S is None:
            self.S = 2.0 * self.mobility_scale
        if self.B == 0 and self.S == 0 and self.dt > self.explicit_dt_limit:
            raise ValueError(
                f"dt={self.dt} exceeds the explicit stability limit {self.explicit_dt_limit:.3e}; "
                "set a positive B or S"
            )
        return self

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / self.ny

    @property
    def cell_size(self) -> float:
        return max(self.lx / self.nx, self.ly / self.ny)

    @property
    def mobility_scale(self) -> float:
        """The 9/(4 epsilon) prefactor of the degenerate mobility."""
        return 9.0 / (4.0 * self.epsilon)

    @property
    def interface_width(self) -> float:
        return math.sqrt(2.0 * self.epsilon)

    @property
    def smoothing_dt(self) -> float:
        return self.smoothing_dt_factor * self.dt

    @property
    def explicit_dt_limit(self) -> float:
        k2_max = (math.pi / self.hx) ** 2 + (math.pi / self.hy) ** 2
        return 2.0 / (self.mobility_scale * self.epsilon * k2_max**2)

    def escalated(self) -> "PhaseParams":
        """Copy with both stabilizers doubled."""
        return self.model_copy(update={"B": 2.0 * self.B, "S": 2.0 * self.S})

    def for_grid(self, nx: int, ny: int) -> "PhaseParams":
        """Same physics on another grid, lengths rescaled to pixel units of the new grid."""
        data = self.model_dump()
        data.update(nx=nx, ny=ny, lx=None, ly=None)
        return PhaseParams(**data)
