"""Parses and validates the sectioned key = value run configuration."""

__copyright__ = """
Copyright (c) 2024 The vacuum-cns contributors.
All rights reserved.
"""

import configparser
from enum import Enum, auto
from typing import Annotated, Any

from pydantic import (
    BaseModel,
    BeforeValidator,
    ConfigDict,
    ValidationError,
    field_validator,
    model_validator,
)

from init_families import BumpVelocity, GasConstants, PowerLawFamily
from mms_oracle import CaseEnum
from stepper import BoundaryMode, FreezeMode, StepperConfig


class ScenarioEnum(Enum):
    """Supported scenarios."""

    RUN = auto()
    VALIDATE = auto()
    SWEEP = auto()
    MMS = auto()


class SweepAxis(Enum):
    """Knobs a sweep can vary."""

    EPS = "eps"
    DT = "dt"
    N = "N"
    L = "L"
    PICARD_TOL = "picard_tol"
    V0_PERTURBATION = "v0_perturbation"


class ConfigError(ValueError):
    """A configuration key is missing, unknown or out of range."""


def _split_list(value: Any) -> Any:
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


# comma-separated in the file
FloatList = Annotated[list[float], BeforeValidator(_split_list)]
IntList = Annotated[list[int], BeforeValidator(_split_list)]


class RunSection(BaseModel):
    """Represents [run].

    delta: weight exponent of the flux norms, gamma when unset.
    s_threshold: entropy extremes skip cells with rho0 at or below it.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    scenario: ScenarioEnum | None = None
    t_final: float | None = None
    sample_every: int = 100
    delta: float | None = None
    s_threshold: float = 0.0
    output_dir: str = "out"

    @field_validator("t_final")
    @classmethod
    def _check_time(cls, value: float | None) -> float | None:
        if value is not None and not value > 0.0:
            raise ValueError("t_final must be positive")
        return value

    @field_validator("sample_every")
    @classmethod
    def _check_sampling(cls, value: int) -> int:
        if value < 1:
            raise ValueError("sample_every must be at least 1")
        return value


class GridSection(BaseModel):
    """Represents [grid]."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    half_width: float
    num_cells: int

    @model_validator(mode="after")
    def _check_domain(self) -> "GridSection":
        if not self.half_width > 0.0:
            raise ValueError("half_width must be positive")
        if self.num_cells < 4:
            raise ValueError("num_cells must be at least 4")
        return self


class FamilySection(BaseModel):
    """Represents [family]: power-law parameters or raw-field files.

    The three *_file keys name whitespace-separated arrays of rho0 and v0 at
    the nodes and pi0 at the cells; they replace the power-law family.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    k_rho: float = 1.0
    ell_rho: float = 1.5
    s0: float = 1.0
    bump_amplitude: float | None = None
    bump_center: float = 0.0
    bump_width: float = 1.0
    rho0_file: str | None = None
    v0_file: str | None = None
    pi0_file: str | None = None

    @model_validator(mode="after")
    def _check_files(self) -> "FamilySection":
        files = [self.rho0_file, self.v0_file, self.pi0_file]
        if any(files) and not all(files):
            raise ValueError("rho0_file, v0_file and pi0_file go together")
        return self

    @property
    def raw(self) -> bool:
        """Raw-field files replace the family."""
        return self.rho0_file is not None

    def to_family(self) -> PowerLawFamily:
        """Returns the power-law family."""
        bump = (
            None
            if self.bump_amplitude is None
            else BumpVelocity(
                amplitude=self.bump_amplitude,
                center=self.bump_center,
                width=self.bump_width,
            )
        )
        return PowerLawFamily(
            k_rho=self.k_rho, ell_rho=self.ell_rho, s0=self.s0, bump=bump
        )


class SweepSection(BaseModel):
    """Represents [sweep].

    cauchy_window: half-width of the window |y| <= w where consecutive
    points are compared, half of L when unset.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    axis: SweepAxis
    values: FloatList
    workers: int = 1
    cauchy_window: float | None = None

    @model_validator(mode="after")
    def _check_values(self) -> "SweepSection":
        if not self.values:
            raise ValueError("values must not be empty")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        return self


class MmsSection(BaseModel):
    """Represents [mms].

    min_space_order, min_time_order: when set, the finest velocity order of
    the axis must reach them.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    case: CaseEnum
    grids: IntList
    dts: FloatList
    half_width: float = 4.0
    workers: int = 1
    min_space_order: float | None = None
    min_time_order: float | None = None


class RunConfig(BaseModel):
    """Represents a fully validated configuration."""

    model_config = ConfigDict(frozen=True)

    scenario: ScenarioEnum
    run: RunSection
    grid: GridSection | None = None
    gas: GasConstants = GasConstants()
    family: FamilySection = FamilySection()
    stepper: StepperConfig | None = None
    sweep: SweepSection | None = None
    mms: MmsSection | None = None
    base_dir: str = "."

    @property
    def delta(self) -> float:
        """Returns the weight exponent, gamma by default."""
        return self.gas.gamma if self.run.delta is None else self.run.delta


SECTION_MODELS: dict[str, type[BaseModel]] = {
    "run": RunSection,
    "grid": GridSection,
    "gas": GasConstants,
    "family": FamilySection,
    "stepper": StepperConfig,
    "sweep": SweepSection,
    "mms": MmsSection,
}

# keys whose values name enum members
ENUM_KEYS: dict[tuple[str, str], type[Enum]] = {
    ("run", "scenario"): ScenarioEnum,
    ("stepper", "bc_mode"): BoundaryMode,
    ("stepper", "freeze"): FreezeMode,
    ("mms", "case"): CaseEnum,
}

# sections each scenario cannot do without
REQUIRED_SECTIONS: dict[ScenarioEnum, tuple[str, ...]] = {
    ScenarioEnum.RUN: ("grid", "stepper"),
    ScenarioEnum.VALIDATE: ("grid",),
    ScenarioEnum.SWEEP: ("grid", "stepper", "sweep"),
    ScenarioEnum.MMS: ("mms",),
}


def _enum_member(section: str, key: str, raw: str, kind: type[Enum]) -> Enum:
    try:
        return kind[raw.strip().upper()]
    except KeyError as err:
        choices = ", ".join(e.name for e in kind)
        raise ConfigError(
            f"{section}.{key}: unknown value {raw!r}, expected one of {choices}"
        ) from err


def _validate_section(section: str, values: dict[str, Any]) -> BaseModel:
    model = SECTION_MODELS[section]
    try:
        return model.model_validate(values)
    except ValidationError as err:
        first = err.errors()[0]
        key = ".".join(str(part) for part in first["loc"])
        where = f"{section}.{key}" if key else section
        if first["type"] == "missing":
            message = "missing required key"
        elif first["type"] == "extra_forbidden":
            message = "unknown key"
        else:
            message = first["msg"].removeprefix("Value error, ")
        raise ConfigError(f"{where}: {message}") from err


def parse_config(
    text: str, scenario: ScenarioEnum | None = None, base_dir: str = "."
) -> RunConfig:
    """Parses INI text into a validated RunConfig.

    scenario: the scenario asked for on the command line; it must agree
    with [run] scenario when both are given.

    Raises ConfigError naming section.key on any problem.

    Example:
    >>> cfg = parse_config('''
    ... [run]
    ... scenario = RUN
    ... t_final = 0.5
    ... [grid]
    ... half_width = 10
    ... num_cells = 200
    ... [stepper]
    ... dt = 1e-3
    ... ''')
    >>> cfg.stepper.eps, cfg.stepper.bc_mode.name, cfg.delta
    (0.0, 'ZERO_STRESS', 1.4)
    """
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # type: ignore[assignment,method-assign]
    try:
        parser.read_string(text)
    except configparser.Error as err:
        raise ConfigError(f"malformed configuration: {err}") from err

    sections: dict[str, BaseModel] = {}
    for section in parser.sections():
        if section not in SECTION_MODELS:
            raise ConfigError(f"{section}: unknown section")
        values: dict[str, Any] = dict(parser.items(section))
        for key, raw in list(values.items()):
            kind = ENUM_KEYS.get((section, key))
            if kind is not None:
                values[key] = _enum_member(section, key, raw, kind)
        sections[section] = _validate_section(section, values)

    run = sections.get("run", RunSection())
    assert isinstance(run, RunSection)
    chosen = scenario or run.scenario
    if chosen is None:
        raise ConfigError("run.scenario: missing required key")
    if scenario is not None and run.scenario not in (None, scenario):
        raise ConfigError(
            f"run.scenario: {run.scenario.name} conflicts with the "
            f"{scenario.name} command"
        )
    for section in REQUIRED_SECTIONS[chosen]:
        if section not in sections:
            raise ConfigError(f"{section}: missing section for {chosen.name}")
    if chosen != ScenarioEnum.VALIDATE and run.t_final is None:
        raise ConfigError("run.t_final: missing required key")

    stepper = sections.get("stepper")
    mms = sections.get("mms")
    if chosen == ScenarioEnum.MMS and stepper is None:
        assert isinstance(mms, MmsSection)
        stepper = StepperConfig(
            dt=min(mms.dts), bc_mode=BoundaryMode.DIRICHLET_V
        )

    try:
        return RunConfig(
            scenario=chosen,
            run=run,
            grid=sections.get("grid"),
            gas=sections.get("gas", GasConstants()),
            family=sections.get("family", FamilySection()),
            stepper=stepper,
            sweep=sections.get("sweep"),
            mms=mms,
            base_dir=base_dir,
        )
    except ValidationError as err:
        raise ConfigError(f"inconsistent configuration: {err}") from err
