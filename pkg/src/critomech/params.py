"""Parameter sets, unit conversion and named presets.

All analysis runs on :class:`SystemParams`, a dimensionless parameter set in
which every rate is measured in units of the mechanical frequency (the figure
presets all use ``omega_m = 1``).  :class:`PhysicalParams` carries SI values
and converts to the dimensionless set at the boundary.

Presets live in ``presets.cfg`` next to this module (INI format, one section
per preset, ``key = value`` per line).  A section ``[name]`` holds
:class:`SystemParams` fields; an optional ``[name.window]`` section holds the
default scan window used by the command line tool; ``[sensing.physical]`` holds
:class:`PhysicalParams` fields.
"""
from __future__ import annotations

import configparser
import dataclasses
import math
from dataclasses import dataclass
from importlib import resources

from scipy import constants

from .errors import InvalidParams

HBAR = constants.hbar
K_B = constants.k


@dataclass(frozen=True)
class SystemParams:
    """Dimensionless parameters of the ring--toroid system.

    Attributes
    ----------
    kappa_a : float
        Intrinsic decay of the ring mode ``a``.
    kappa_b : float
        Total decay of the toroid mode ``b``.
    kappa_ex : float
        Out-coupling of mode ``a`` into the waveguide.
    delta : float
        Optical frequency difference ``omega_b - omega_a``.
    Delta : float
        Drive detuning ``omega_a - omega_in``.
    g1 : float
        Optomechanical coupling (per unit dimensionless displacement).
    g2 : float
        Ring--toroid optical coupling.
    omega_m : float
        Mechanical frequency.
    gamma_m : float
        Mechanical damping.
    I_in : float
        Drive photon flux.
    """

    kappa_a: float
    kappa_b: float
    kappa_ex: float
    delta: float
    Delta: float
    g1: float
    g2: float
    omega_m: float = 1.0
    gamma_m: float = 0.1
    I_in: float = 0.0

    def __post_init__(self):
        for name in ("kappa_a", "kappa_b", "kappa_ex", "gamma_m", "omega_m", "I_in", "g2"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise InvalidParams(f"{name} must be finite and >= 0, got {value!r}")
        for name in ("delta", "Delta", "g1"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidParams(f"{name} must be finite")
        if self.omega_m == 0:
            raise InvalidParams("omega_m must be > 0")

    @property
    def kappa(self) -> float:
        """Half-width of mode ``a``: ``(kappa_a + kappa_ex) / 2``."""
        return 0.5 * (self.kappa_a + self.kappa_ex)

    @property
    def mass(self) -> float:
        """Effective mass in dimensionless units (``hbar = 1``).

        The equations ``x' = omega_m p``, ``p' = -omega_m x + F`` describe an
        oscillator ``m x'' = -m omega_m**2 x + F`` with ``m = 1 / omega_m``.
        """
        return 1.0 / self.omega_m

    def replace(self, **changes) -> "SystemParams":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


PARAM_FIELDS = tuple(f.name for f in dataclasses.fields(SystemParams))


@dataclass(frozen=True)
class PhysicalParams:
    """SI parameters.  Every rate is an angular rate in rad/s.

    ``g1_si`` is the frequency pull per metre of displacement (rad s^-1 m^-1).
    The dimensionless position is the displacement in units of the zero-point
    length ``sqrt(hbar / (mass * omega_m_si))``.
    """

    omega_m_si: float
    mass: float
    gamma_m_si: float
    g1_si: float
    g2_si: float
    kappa_a_si: float
    kappa_b_si: float
    kappa_ex_si: float
    input_power: float
    temperature: float = 0.0
    wavelength: float = 1.55e-6
    Delta_si: float = 0.0
    delta_si: float = 0.0

    def __post_init__(self):
        for name in ("omega_m_si", "mass", "gamma_m_si", "g1_si", "g2_si",
                     "kappa_a_si", "kappa_b_si", "kappa_ex_si", "wavelength"):
            if not getattr(self, name) > 0:
                raise InvalidParams(f"{name} must be > 0")
        if self.temperature < 0 or self.input_power < 0:
            raise InvalidParams("temperature and input_power must be >= 0")

    def replace(self, **changes) -> "PhysicalParams":
        return dataclasses.replace(self, **changes)

    @property
    def x_zpf(self) -> float:
        return math.sqrt(HBAR / (self.mass * self.omega_m_si))

    @property
    def photon_flux(self) -> float:
        """Drive photon flux in photons per second."""
        omega_l = 2 * math.pi * constants.c / self.wavelength
        return self.input_power / (HBAR * omega_l)

    def to_normalized(self) -> SystemParams:
        w = self.omega_m_si
        return SystemParams(
            kappa_a=self.kappa_a_si / w,
            kappa_b=self.kappa_b_si / w,
            kappa_ex=self.kappa_ex_si / w,
            delta=self.delta_si / w,
            Delta=self.Delta_si / w,
            g1=self.g1_si * self.x_zpf / w,
            g2=self.g2_si / w,
            omega_m=1.0,
            gamma_m=self.gamma_m_si / w,
            I_in=self.photon_flux / w,
        )

    @property
    def psd_unit(self) -> float:
        """``hbar * m * omega_m**2`` in N^2/Hz, the unit of dimensionless force PSDs."""
        return HBAR * self.mass * self.omega_m_si**2

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


PHYSICAL_FIELDS = tuple(f.name for f in dataclasses.fields(PhysicalParams))


def _read_presets() -> configparser.ConfigParser:
    parser = configparser.ConfigParser()
    parser.optionxform = str  # keep "Delta" and "delta" distinct
    text = resources.files(__package__).joinpath("presets.cfg").read_text()
    parser.read_string(text)
    return parser


def preset_names() -> list[str]:
    return [s for s in _read_presets().sections() if "." not in s]


def load_preset(name: str) -> SystemParams:
    """Return the :class:`SystemParams` of a named preset."""
    parser = _read_presets()
    if name not in parser or "." in name:
        raise KeyError(f"unknown preset {name!r}; choose from {preset_names()}")
    section = parser[name]
    if "physical" in section and section.getboolean("physical"):
        return load_physical(name).to_normalized()
    return params_from_mapping(dict(section))


def load_window(name: str) -> dict:
    """Default scan window of a preset as ``delta_range`` and ``iin_range`` pairs.

    Returns an empty dict if the preset declares no window.
    """
    parser = _read_presets()
    key = f"{name}.window"
    if key not in parser:
        return {}
    w = {k: float(v) for k, v in parser[key].items()}
    return {"delta_range": (w["delta_min"], w["delta_max"]),
            "iin_range": (w["iin_min"], w["iin_max"])}


def load_physical(name: str = "sensing") -> PhysicalParams:
    parser = _read_presets()
    key = f"{name}.physical"
    if key not in parser:
        raise KeyError(f"preset {name!r} has no physical parameter section")
    return PhysicalParams(**{k: float(v) for k, v in parser[key].items()})


def params_from_mapping(mapping: dict, base: SystemParams | None = None) -> SystemParams:
    """Build parameters from string or numeric values, rejecting unknown keys."""
    mapping = {k: v for k, v in mapping.items() if k != "physical"}
    unknown = set(mapping) - set(PARAM_FIELDS)
    if unknown:
        raise InvalidParams(f"unknown parameter(s): {', '.join(sorted(unknown))}")
    values = {k: float(v) for k, v in mapping.items()}
    if base is not None:
        return base.replace(**values)
    missing = {"kappa_a", "kappa_b", "kappa_ex", "delta", "Delta", "g1", "g2"} - set(values)
    if missing:
        raise InvalidParams(f"missing parameter(s): {', '.join(sorted(missing))}")
    return SystemParams(**values)


def read_config_file(path) -> dict:
    """Parse a flat ``key = value`` file (``#`` comments, blank lines ignored)."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InvalidParams(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key] = value
    return out
