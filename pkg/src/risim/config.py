"""Run configuration: scenario, frame, campaign and output sections.

Defaults reproduce the reference indoor-factory scenario exactly (node
coordinates, 3.5 GHz carrier, 30 kHz subcarriers, K=1024, B=16, M=64,
link gains -86/-62/-60 dB, cluster counts 20/10/10, angle spreads
7/12/15/20 degrees, noise -90 dBW, 4/16-point constellations, N=1000).
Everything is overridable from a YAML file plus dotted-path overrides.
"""

import hashlib
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional

import numpy as np
import yaml

from .arrays import ArrayGeometry
from .channel import LinkStatistics
from .errors import ConfigurationError


def _direction(src, dst) -> tuple[float, float]:
    """(azimuth, zenith) of the ray from src toward dst."""
    d = np.asarray(dst, dtype=float) - np.asarray(src, dtype=float)
    r = np.linalg.norm(d)
    if r == 0.0:
        raise ConfigurationError("two network nodes share a location")
    azimuth = float(np.arctan2(d[1], d[0]))
    zenith = float(np.arccos(np.clip(d[2] / r, -1.0, 1.0)))
    if azimuth >= np.pi:          # keep within [-pi, pi)
        azimuth -= 2.0 * np.pi
    return azimuth, zenith


@dataclass(frozen=True)
class SystemConfig:
    """Physical scenario: geometry, waveform, channel statistics, power."""

    bs_location: tuple = (0.0, 0.0, 3.0)
    ris_location: tuple = (10.0, 0.0, 3.0)
    ue_location: tuple = (10.0, 12.0, 1.0)
    carrier_hz: float = 3.5e9
    subcarrier_spacing_hz: float = 30e3
    k_subcarriers: int = 1024
    bs_shape: tuple = (4, 4)            # B = 16
    ris_shape: tuple = (8, 8)           # M = 64
    element_spacing: float = 0.5        # wavelengths, both arrays
    gain_direct_db: float = -86.0
    gain_bs_ris_db: float = -62.0
    gain_ris_ue_db: float = -60.0
    rician_bs_ris: float = 10.0         # linear K-factor (undeclared; assumption)
    rician_ris_ue: float = 10.0
    clusters_direct: int = 20
    clusters_bs_ris: int = 10
    clusters_ris_ue: int = 10
    asd_deg: float = 7.0
    asa_deg: float = 12.0
    zsd_deg: float = 15.0
    zsa_deg: float = 20.0
    delay_spread_s: float = 30e-9       # undeclared; low-spread factory assumption
    noise_var_dbw: float = -90.0
    psk_order_stage1: int = 4
    psk_order_stage2: int = 16
    qam_order_stage1: int = 4
    qam_order_stage2: int = 16
    pilot_ratio: int = 3                # K / K_p for the coherent stage one
    packet_bits: int = 20
    cp_fraction: float = 0.125          # L_CP = K/8 samples
    freeze_bs_ris: bool = False         # redraw the BS-RIS link per block unless set

    def __post_init__(self):
        if self.k_subcarriers < 3:
            raise ConfigurationError("scenario.k_subcarriers must be >= 3")
        for name in ("carrier_hz", "subcarrier_spacing_hz", "element_spacing",
                     "cp_fraction"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"scenario.{name} must be positive")
        for name in ("rician_bs_ris", "rician_ris_ue"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"scenario.{name} must be >= 0")
        if self.pilot_ratio < 1:
            raise ConfigurationError("scenario.pilot_ratio must be >= 1")

    # -- derived quantities -------------------------------------------------

    @property
    def bs_geometry(self) -> ArrayGeometry:
        return ArrayGeometry(self.bs_shape[0], self.bs_shape[1],
                             self.element_spacing, self.element_spacing)

    @property
    def ris_geometry(self) -> ArrayGeometry:
        return ArrayGeometry(self.ris_shape[0], self.ris_shape[1],
                             self.element_spacing, self.element_spacing)

    @property
    def b_antennas(self) -> int:
        return self.bs_shape[0] * self.bs_shape[1]

    @property
    def m_elements(self) -> int:
        return self.ris_shape[0] * self.ris_shape[1]

    @property
    def noise_var(self) -> float:
        return 10.0 ** (self.noise_var_dbw / 10.0)

    @property
    def sample_rate_hz(self) -> float:
        return self.k_subcarriers * self.subcarrier_spacing_hz

    @property
    def cp_samples(self) -> int:
        return int(round(self.k_subcarriers * self.cp_fraction))

    @property
    def bs_to_ue(self) -> tuple[float, float]:
        return _direction(self.bs_location, self.ue_location)

    @property
    def bs_to_ris(self) -> tuple[float, float]:
        return _direction(self.bs_location, self.ris_location)

    @property
    def ris_to_bs(self) -> tuple[float, float]:
        return _direction(self.ris_location, self.bs_location)

    @property
    def ris_to_ue(self) -> tuple[float, float]:
        return _direction(self.ris_location, self.ue_location)

    def direct_stats(self) -> LinkStatistics:
        return LinkStatistics(
            large_scale_gain_db=self.gain_direct_db, rician_factor=0.0,
            n_clusters=self.clusters_direct, delay_spread_s=self.delay_spread_s,
            asd_deg=self.asd_deg, asa_deg=self.asa_deg,
            zsd_deg=self.zsd_deg, zsa_deg=self.zsa_deg,
            los_aod=_direction(self.ue_location, self.bs_location),
            los_aoa=self.bs_to_ue,
            sample_rate_hz=self.sample_rate_hz,
            max_delay_samples=self.cp_samples)

    def bs_ris_stats(self) -> LinkStatistics:
        return LinkStatistics(
            large_scale_gain_db=self.gain_bs_ris_db, rician_factor=self.rician_bs_ris,
            n_clusters=self.clusters_bs_ris, delay_spread_s=self.delay_spread_s,
            asd_deg=self.asd_deg, asa_deg=self.asa_deg,
            zsd_deg=self.zsd_deg, zsa_deg=self.zsa_deg,
            los_aod=self.ris_to_bs, los_aoa=self.bs_to_ris,
            sample_rate_hz=self.sample_rate_hz,
            max_delay_samples=self.cp_samples)

    def ris_ue_stats(self) -> LinkStatistics:
        return LinkStatistics(
            large_scale_gain_db=self.gain_ris_ue_db, rician_factor=self.rician_ris_ue,
            n_clusters=self.clusters_ris_ue, delay_spread_s=self.delay_spread_s,
            asd_deg=self.asd_deg, asa_deg=self.asa_deg,
            zsd_deg=self.zsd_deg, zsa_deg=self.zsa_deg,
            los_aod=_direction(self.ue_location, self.ris_location),
            los_aoa=self.ris_to_ue,
            sample_rate_hz=self.sample_rate_hz,
            max_delay_samples=self.cp_samples)


@dataclass(frozen=True)
class FrameConfig:
    """Two-stage frame layout and the codebook grid driving stage one."""

    n_total: int = 1000                 # N OFDM symbols per coherence block
    mobility_mps: Optional[float] = None
    n_azimuth: int = 16
    n_zenith: int = 8
    dwell: int = 1                      # training symbols per codeword

    def __post_init__(self):
        if self.n_total < 1:
            raise ConfigurationError("frame.n_total must be >= 1")
        if self.n_azimuth < 1 or self.n_zenith < 1:
            raise ConfigurationError("frame codebook grid sizes must be >= 1")
        if self.dwell < 1:
            raise ConfigurationError("frame.dwell must be >= 1")


@dataclass(frozen=True)
class CampaignConfig:
    """Monte Carlo sweep settings."""

    px_dbw: tuple = (-30.0, -25.0, -20.0, -15.0, -10.0, -8.0, -5.0, 0.0)
    n_blocks: int = 100
    seed: int = 20240
    schemes: tuple = ("ncds", "cds")
    ris_mode: str = "codebook"          # codebook | genie | off
    workers: int = 1

    def __post_init__(self):
        if self.n_blocks < 1:
            raise ConfigurationError("campaign.n_blocks must be >= 1")
        if self.ris_mode not in ("codebook", "genie", "off"):
            raise ConfigurationError(
                f"campaign.ris_mode must be codebook/genie/off, got {self.ris_mode!r}")
        if self.workers < 1:
            raise ConfigurationError("campaign.workers must be >= 1")
        for s in self.schemes:
            if s not in ("ncds", "cds", "cds_pce", "rs", "rs+cds", "rs+ncds"):
                raise ConfigurationError(f"campaign.schemes: unknown scheme {s!r}")


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "results"
    format: str = "csv"

    def __post_init__(self):
        if self.format != "csv":
            raise ConfigurationError("output.format: only 'csv' is supported")


@dataclass(frozen=True)
class RunConfig:
    scenario: SystemConfig = field(default_factory=SystemConfig)
    frame: FrameConfig = field(default_factory=FrameConfig)
    campaign: CampaignConfig = field(default_factory=CampaignConfig)
    output: OutputConfig = field(default_factory=OutputConfig)


_SECTIONS = {"scenario": SystemConfig, "frame": FrameConfig,
             "campaign": CampaignConfig, "output": OutputConfig}


def _coerce(cls, raw: dict, path: str):
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in raw.items():
        if key not in known:
            raise ConfigurationError(f"unknown config field {path}.{key}")
        if isinstance(value, list):
            value = tuple(tuple(v) if isinstance(v, list) else v for v in value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except ConfigurationError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"invalid value under {path}: {exc}") from exc


def config_from_dict(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigurationError("config root must be a mapping")
    parts = {}
    for key, value in raw.items():
        if key not in _SECTIONS:
            raise ConfigurationError(f"unknown config section {key!r}")
        if value is None:
            value = {}
        if not isinstance(value, dict):
            raise ConfigurationError(f"config section {key!r} must be a mapping")
        parts[key] = _coerce(_SECTIONS[key], value, key)
    return RunConfig(**parts)


def load_config(path: Optional[str]) -> RunConfig:
    """Read a YAML config; a missing path means pure defaults."""
    if path is None:
        return RunConfig()
    with open(path, encoding="utf-8") as f:
        raw = yaml.safe_load(f) or {}
    return config_from_dict(raw)


def _parse_scalar(text: str):
    return yaml.safe_load(text)


def apply_overrides(config: RunConfig, overrides: dict[str, object]) -> RunConfig:
    """Apply dotted-path overrides like {'scenario.noise_var_dbw': -120}."""
    for dotted, value in overrides.items():
        section, _, name = dotted.partition(".")
        if section not in _SECTIONS or not name:
            raise ConfigurationError(f"unknown override path {dotted!r}")
        current = getattr(config, section)
        if name not in {f.name for f in fields(current)}:
            raise ConfigurationError(f"unknown config field {dotted}")
        if isinstance(value, str):
            value = _parse_scalar(value)
        if isinstance(value, list):
            value = tuple(value)
        try:
            updated = replace(current, **{name: value})
        except ConfigurationError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"invalid value for {dotted}: {exc}") from exc
        config = replace(config, **{section: updated})
    return config


def config_to_yaml(config: RunConfig) -> str:
    """Canonical resolved form: sorted keys, lists for tuples."""

    def clean(obj):
        if isinstance(obj, tuple):
            return [clean(x) for x in obj]
        if isinstance(obj, dict):
            return {k: clean(v) for k, v in obj.items()}
        return obj

    return yaml.safe_dump(clean(asdict(config)), sort_keys=True)


def config_hash(config: RunConfig) -> str:
    return hashlib.sha256(config_to_yaml(config).encode()).hexdigest()
