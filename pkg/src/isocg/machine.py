"""Hardware descriptions, measured operating points, and first-order models.

A :class:`SampleSet` couples static machine specs (cores, frequency range,
last-level cache, stream bandwidth) with measured or derived performance
and power points.  On top of that sit the small analytical models used
throughout: the memory-bound roofline bound, an ordinary-least-squares
decomposition of power into static and per-core parts, frequency-scaling
factors, and on-chip problem sizing against the LLC.

On-disk format: a directory holding ``machines.ini`` (one section per
machine, fields as in :class:`MachineSpec`) and ``samples.csv`` with header
``machine,active_cores,freq_ghz,problem_class,gflops,watts,provenance``.
Bandwidth is in GB/s (10**9 bytes per second); LLC sizes are exact byte
counts (binary mebibytes in the bundled data, since an n x n double matrix
fills the cache when 8 n^2 equals the byte count).
"""

from __future__ import annotations

import configparser
import csv
import io
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InsufficientDataError, SampleSetError, UnknownMachineError

__all__ = [
    "DOUBLE_GEMV_INTENSITY",
    "MachineSpec",
    "PerfSample",
    "StaticPowerFit",
    "ScalingFactors",
    "SampleSet",
    "roofline_gflops",
    "static_power_fit",
    "scaling_factors",
    "gflops_per_watt",
    "max_onchip_n",
    "load_sampleset",
    "save_sampleset",
    "default_data_dir",
    "bundled_sampleset",
]

# Double-precision gemv streams 8 bytes of matrix per multiply-add pair.
DOUBLE_GEMV_INTENSITY = 0.25

PROBLEM_CLASSES = ("on_chip", "off_chip")
PROVENANCES = ("paper", "derived", "user")

MACHINES_FILENAME = "machines.ini"
SAMPLES_FILENAME = "samples.csv"
SAMPLES_HEADER = ["machine", "active_cores", "freq_ghz", "problem_class", "gflops", "watts", "provenance"]

DATA_DIR_ENV = "ISOCG_DATA_DIR"


@dataclass(frozen=True)
class MachineSpec:
    """Static description of one CPU socket or cluster."""

    name: str
    cores_per_unit: int
    freq_min_ghz: float
    freq_max_ghz: float
    llc_bytes: int
    stream_bandwidth_gbs: float

    def __post_init__(self) -> None:
        if self.cores_per_unit < 1:
            raise ValueError(f"{self.name}: cores_per_unit must be >= 1")
        if self.freq_min_ghz <= 0 or self.freq_max_ghz <= 0:
            raise ValueError(f"{self.name}: frequencies must be positive")
        if self.freq_min_ghz > self.freq_max_ghz:
            raise ValueError(f"{self.name}: freq_min_ghz exceeds freq_max_ghz")
        if self.llc_bytes <= 0:
            raise ValueError(f"{self.name}: llc_bytes must be positive")
        if self.stream_bandwidth_gbs <= 0:
            raise ValueError(f"{self.name}: stream_bandwidth_gbs must be positive")


@dataclass(frozen=True)
class PerfSample:
    """One measured or derived (GFLOPS, W) operating point."""

    machine: str
    active_cores: int
    freq_ghz: float
    problem_class: str
    gflops: float
    watts: float
    provenance: str = "user"

    def __post_init__(self) -> None:
        if self.problem_class not in PROBLEM_CLASSES:
            raise ValueError(
                f"problem_class must be one of {PROBLEM_CLASSES}, got {self.problem_class!r}"
            )
        if self.provenance not in PROVENANCES:
            raise ValueError(f"provenance must be one of {PROVENANCES}, got {self.provenance!r}")
        if self.gflops <= 0 or self.watts <= 0:
            raise ValueError(f"{self.key()}: gflops and watts must be positive")
        if self.active_cores < 1:
            raise ValueError(f"{self.key()}: active_cores must be >= 1")

    def key(self) -> tuple[str, int, float, str]:
        return (self.machine, self.active_cores, self.freq_ghz, self.problem_class)


class SampleSet:
    """Machine specs plus uniquely-keyed performance samples."""

    def __init__(self) -> None:
        self.specs: dict[str, MachineSpec] = {}
        self._samples: dict[tuple, PerfSample] = {}

    @property
    def samples(self) -> list[PerfSample]:
        return list(self._samples.values())

    def add_spec(self, spec: MachineSpec) -> None:
        if spec.name in self.specs:
            raise SampleSetError(f"duplicate machine spec {spec.name!r}")
        self.specs[spec.name] = spec

    def add_sample(self, sample: PerfSample) -> None:
        if sample.machine not in self.specs:
            raise UnknownMachineError(
                f"sample references unknown machine {sample.machine!r}",
                available=sorted(self.specs),
            )
        if sample.key() in self._samples:
            raise SampleSetError(f"duplicate sample key {sample.key()}")
        self._samples[sample.key()] = sample

    def spec(self, name: str) -> MachineSpec:
        try:
            return self.specs[name]
        except KeyError:
            raise UnknownMachineError(
                f"unknown machine {name!r}", available=sorted(self.specs)
            ) from None

    def sample(
        self, machine: str, active_cores: int, freq_ghz: float, problem_class: str = "on_chip"
    ) -> PerfSample:
        key = (machine, active_cores, freq_ghz, problem_class)
        try:
            return self._samples[key]
        except KeyError:
            available = [
                f"{m}:{c}:{f}:{p}" for (m, c, f, p) in sorted(self._samples)
            ]
            raise UnknownMachineError(
                f"no sample for {machine}:{active_cores}:{freq_ghz}:{problem_class}",
                available=available,
            ) from None

    def __eq__(self, other) -> bool:
        if not isinstance(other, SampleSet):
            return NotImplemented
        return self.specs == other.specs and self._samples == other._samples


def roofline_gflops(spec: MachineSpec, arithmetic_intensity: float = DOUBLE_GEMV_INTENSITY) -> float:
    """Memory-bound roofline: stream bandwidth times arithmetic intensity.

    No compute ceiling is modelled; the kernels of interest are firmly
    bandwidth limited.
    """
    if arithmetic_intensity <= 0:
        raise ValueError(f"arithmetic intensity must be > 0, got {arithmetic_intensity}")
    return spec.stream_bandwidth_gbs * arithmetic_intensity


@dataclass(frozen=True)
class StaticPowerFit:
    intercept_watts: float   # static power: draw extrapolated to zero active cores
    watts_per_core: float
    r_squared: float

    def __iter__(self):
        return iter((self.intercept_watts, self.watts_per_core, self.r_squared))


def static_power_fit(samples) -> StaticPowerFit:
    """OLS of watts against active cores for one machine at one frequency.

    The intercept is read as static power.  Requires at least two distinct
    core counts; mixing machines, frequencies or problem classes is
    rejected.
    """
    pts = list(samples)
    if len({(s.machine, s.freq_ghz, s.problem_class) for s in pts} or {None}) > 1:
        raise ValueError("samples must share machine, frequency and problem class")
    cores = np.array([s.active_cores for s in pts], dtype=float)
    watts = np.array([s.watts for s in pts], dtype=float)
    if len(set(cores.tolist())) < 2:
        raise InsufficientDataError(
            f"need samples at >= 2 distinct core counts, got {len(set(cores.tolist()))}"
        )
    slope, intercept = np.polyfit(cores, watts, 1)
    predicted = intercept + slope * cores
    ss_res = float(np.sum((watts - predicted) ** 2))
    ss_tot = float(np.sum((watts - watts.mean()) ** 2))
    r_squared = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return StaticPowerFit(float(intercept), float(slope), r_squared)


@dataclass(frozen=True)
class ScalingFactors:
    perf_factor: float
    power_factor: float
    freq_factor: float

    def __iter__(self):
        return iter((self.perf_factor, self.power_factor, self.freq_factor))


def scaling_factors(low: PerfSample, high: PerfSample) -> ScalingFactors:
    """high/low ratios of GFLOPS, watts and frequency between two points."""
    if (low.machine, low.active_cores, low.problem_class) != (
        high.machine, high.active_cores, high.problem_class
    ):
        raise ValueError(
            "scaling_factors requires matching machine, cores and problem class: "
            f"{low.key()} vs {high.key()}"
        )
    return ScalingFactors(
        perf_factor=high.gflops / low.gflops,
        power_factor=high.watts / low.watts,
        freq_factor=high.freq_ghz / low.freq_ghz,
    )


def gflops_per_watt(sample: PerfSample) -> float:
    return sample.gflops / sample.watts


def max_onchip_n(llc_bytes: int) -> int:
    """Largest n such that an n x n double matrix fits in the cache."""
    if llc_bytes < 8:
        raise ValueError(f"llc_bytes must be >= 8, got {llc_bytes}")
    return math.isqrt(int(llc_bytes) // 8)


# ---------------------------------------------------------------------------
# File ingestion


def _parse_machines(path: Path) -> list[MachineSpec]:
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as handle:
            parser.read_file(handle, source=str(path))
    except configparser.Error as exc:
        raise SampleSetError(f"{path}: {exc}") from exc
    specs = []
    for name in parser.sections():
        section = parser[name]
        try:
            specs.append(
                MachineSpec(
                    name=name,
                    cores_per_unit=section.getint("cores_per_unit"),
                    freq_min_ghz=section.getfloat("freq_min_ghz"),
                    freq_max_ghz=section.getfloat("freq_max_ghz"),
                    llc_bytes=section.getint("llc_bytes"),
                    stream_bandwidth_gbs=section.getfloat("stream_bandwidth_gbs"),
                )
            )
        except (TypeError, ValueError) as exc:
            raise SampleSetError(f"{path}: machine {name!r}: {exc}") from exc
    return specs


def _parse_samples(path: Path, sset: SampleSet) -> None:
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise SampleSetError(f"{path}:1: empty samples file") from None
        if header != SAMPLES_HEADER:
            raise SampleSetError(
                f"{path}:1: bad header {header!r}, expected {SAMPLES_HEADER!r}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(SAMPLES_HEADER):
                raise SampleSetError(
                    f"{path}:{lineno}: expected {len(SAMPLES_HEADER)} fields, got {len(row)}"
                )
            try:
                sample = PerfSample(
                    machine=row[0],
                    active_cores=int(row[1]),
                    freq_ghz=float(row[2]),
                    problem_class=row[3],
                    gflops=float(row[4]),
                    watts=float(row[5]),
                    provenance=row[6],
                )
            except ValueError as exc:
                raise SampleSetError(f"{path}:{lineno}: {exc}") from exc
            try:
                sset.add_sample(sample)
            except SampleSetError as exc:
                raise SampleSetError(f"{path}:{lineno}: {exc}") from exc


def load_sampleset(path) -> SampleSet:
    """Load a sample set from a directory or from a samples CSV path.

    Given a directory, ``machines.ini`` and ``samples.csv`` inside it are
    read; given a CSV path, the machine file is looked up next to it.
    """
    p = Path(path)
    if p.is_dir():
        machines_path = p / MACHINES_FILENAME
        samples_path = p / SAMPLES_FILENAME
    else:
        samples_path = p
        machines_path = p.parent / MACHINES_FILENAME
    sset = SampleSet()
    for spec in _parse_machines(machines_path):
        sset.add_spec(spec)
    _parse_samples(samples_path, sset)
    return sset


def _format_number(value) -> str:
    # repr round-trips floats exactly, which keeps save/load an identity.
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def save_sampleset(sset: SampleSet, directory) -> None:
    """Write ``machines.ini`` and ``samples.csv`` in normalized form.

    Machines are sorted by name; samples keep their insertion order.
    Saving a loaded set reproduces the saved bytes.
    """
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)

    parser = configparser.ConfigParser()
    for name in sorted(sset.specs):
        spec = sset.specs[name]
        parser[name] = {
            "cores_per_unit": _format_number(spec.cores_per_unit),
            "freq_min_ghz": _format_number(spec.freq_min_ghz),
            "freq_max_ghz": _format_number(spec.freq_max_ghz),
            "llc_bytes": _format_number(spec.llc_bytes),
            "stream_bandwidth_gbs": _format_number(spec.stream_bandwidth_gbs),
        }
    buffer = io.StringIO()
    parser.write(buffer)
    (out / MACHINES_FILENAME).write_text(buffer.getvalue(), encoding="utf-8")

    rows = [",".join(SAMPLES_HEADER)]
    for s in sset.samples:
        rows.append(
            ",".join(
                [
                    s.machine,
                    _format_number(s.active_cores),
                    _format_number(s.freq_ghz),
                    s.problem_class,
                    _format_number(s.gflops),
                    _format_number(s.watts),
                    s.provenance,
                ]
            )
        )
    (out / SAMPLES_FILENAME).write_text("\n".join(rows) + "\n", encoding="utf-8")


def default_data_dir() -> Path:
    """Bundled reference data directory, overridable via ISOCG_DATA_DIR."""
    override = os.environ.get(DATA_DIR_ENV)
    if override:
        return Path(override)
    return Path(__file__).parent / "data"


def bundled_sampleset() -> SampleSet:
    return load_sampleset(default_data_dir())
