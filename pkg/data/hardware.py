"""
Hardware Configuration
Loads the versioned hardware description and checks units on every cost entry
"""

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Tuple

import ujson

import config
from utils.errors import ConfigError

LOGGER = logging.getLogger(__name__)

# Expected unit for each cost family
ENERGY_UNIT = "pJ"
AREA_UNIT = "mm2"
POWER_UNIT = "mW"

ENERGY_COMPONENTS = (
    "dac", "cell_read", "cell_write", "sna", "logic_op",
    "or_access", "ir_access", "controller_cycle", "edram_byte", "digital_op",
)
AREA_COMPONENTS = (
    "dac", "cell", "sna", "or", "ir", "controller", "edram", "digital_unit", "lut",
)


@dataclass(frozen=True)
class AdcSpec:
    """One ADC flavour, keyed by the unit array size it serves"""

    bits: int
    power_mw: float
    area_mm2: float
    energy_pj: float


@dataclass(frozen=True)
class HardwareConfig:
    name: str = "hurry-default"
    tiles: int = config.TILES
    imas_per_tile: int = config.IMAS_PER_TILE
    array_rows: int = config.ARRAY_ROWS
    array_cols: int = config.ARRAY_COLS
    ir_bytes: int = config.IR_BYTES
    or_bytes: int = config.OR_BYTES
    edram_bytes: int = config.EDRAM_BYTES
    clock_mhz: float = config.CLOCK_MHZ
    adc_samples_per_cycle: int = config.ADC_SAMPLES_PER_CYCLE
    adc: Dict[int, AdcSpec] = field(default_factory=dict)
    energy_pj: Dict[str, float] = field(default_factory=dict)
    area_mm2: Dict[str, float] = field(default_factory=dict)

    @property
    def array(self) -> Tuple[int, int]:
        return (self.array_rows, self.array_cols)

    @property
    def total_imas(self) -> int:
        return self.tiles * self.imas_per_tile

    def adc_for(self, size: int) -> AdcSpec:
        """ADC serving a square array of the given size"""
        if size not in self.adc:
            raise ConfigError(f"no ADC entry for array size {size}")
        return self.adc[size]

    @property
    def adc_bits(self) -> int:
        return self.adc_for(self.array_cols).bits

    def energy(self, component: str) -> float:
        if component not in self.energy_pj:
            raise ConfigError(f"missing energy cost for component '{component}'")
        return self.energy_pj[component]

    def area(self, component: str) -> float:
        if component not in self.area_mm2:
            raise ConfigError(f"missing area cost for component '{component}'")
        return self.area_mm2[component]

    def scaled(self, factor: float) -> "HardwareConfig":
        """Copy with every unit cost multiplied by factor"""
        return replace(
            self,
            adc={k: AdcSpec(v.bits, v.power_mw * factor, v.area_mm2 * factor, v.energy_pj * factor)
                 for k, v in self.adc.items()},
            energy_pj={k: v * factor for k, v in self.energy_pj.items()},
            area_mm2={k: v * factor for k, v in self.area_mm2.items()},
        )

    def with_array(self, rows: int, cols: int) -> "HardwareConfig":
        return replace(self, array_rows=rows, array_cols=cols)


def _cost(entry, unit: str, where: str) -> float:
    if not isinstance(entry, dict) or "value" not in entry or "unit" not in entry:
        raise ConfigError(f"{where}: expected an object with 'value' and 'unit'")
    if entry["unit"] != unit:
        raise ConfigError(f"{where}: unit '{entry['unit']}' given, '{unit}' expected")
    value = entry["value"]
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ConfigError(f"{where}: value must be a number")
    if value < 0:
        raise ConfigError(f"{where}: cost must be >= 0, got {value}")
    return float(value)


def _positive_int(section: dict, key: str, default: int) -> int:
    value = section.get(key, default)
    if not isinstance(value, int) or isinstance(value, bool) or value < 1:
        raise ConfigError(f"architecture.{key} must be a positive integer, got {value!r}")
    return value


def parse_hardware(text: str) -> HardwareConfig:
    """
    Parse a hardware configuration document

    Args:
        text (str): JSON text, schema "v1"

    Returns:
        HardwareConfig: Validated configuration
    """

    try:
        doc = ujson.loads(text)
    except ValueError as exc:
        raise ConfigError(f"hardware config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("hardware config must be an object")
    if doc.get("version") != config.CONFIG_SCHEMA_VERSION:
        raise ConfigError(f"unsupported hardware config version {doc.get('version')!r}")

    arch = doc.get("architecture", {})
    adc = {}
    for size, entry in doc.get("adc", {}).items():
        where = f"adc.{size}"
        if not str(size).isdigit():
            raise ConfigError(f"{where}: array size keys must be integers")
        bits = entry.get("bits") if isinstance(entry, dict) else None
        if not isinstance(bits, int) or bits < 1:
            raise ConfigError(f"{where}: 'bits' must be a positive integer")
        adc[int(size)] = AdcSpec(
            bits=bits,
            power_mw=_cost(entry.get("power"), POWER_UNIT, f"{where}.power"),
            area_mm2=_cost(entry.get("area"), AREA_UNIT, f"{where}.area"),
            energy_pj=_cost(entry.get("energy"), ENERGY_UNIT, f"{where}.energy"),
        )

    energy = {name: _cost(value, ENERGY_UNIT, f"energy.{name}")
              for name, value in doc.get("energy", {}).items()}
    area = {name: _cost(value, AREA_UNIT, f"area.{name}")
            for name, value in doc.get("area", {}).items()}

    hw = HardwareConfig(
        name=doc.get("name", "hardware"),
        tiles=_positive_int(arch, "tiles", config.TILES),
        imas_per_tile=_positive_int(arch, "imas_per_tile", config.IMAS_PER_TILE),
        array_rows=_positive_int(arch, "array_rows", config.ARRAY_ROWS),
        array_cols=_positive_int(arch, "array_cols", config.ARRAY_COLS),
        ir_bytes=_positive_int(arch, "ir_bytes", config.IR_BYTES),
        or_bytes=_positive_int(arch, "or_bytes", config.OR_BYTES),
        edram_bytes=_positive_int(arch, "edram_bytes", config.EDRAM_BYTES),
        clock_mhz=float(arch.get("clock_mhz", config.CLOCK_MHZ)),
        adc_samples_per_cycle=_positive_int(arch, "adc_samples_per_cycle", config.ADC_SAMPLES_PER_CYCLE),
        adc=adc,
        energy_pj=energy,
        area_mm2=area,
    )
    validate_hardware(hw)
    LOGGER.debug("Loaded hardware config %s (%dx%d arrays)", hw.name, hw.array_rows, hw.array_cols)
    return hw


def validate_hardware(hw: HardwareConfig, sizes=None):
    """Every simulated array size needs an ADC entry and every cost a component"""
    for size in sizes or [hw.array_cols]:
        hw.adc_for(size)
    missing = [c for c in ENERGY_COMPONENTS if c not in hw.energy_pj]
    missing += [c for c in AREA_COMPONENTS if c not in hw.area_mm2]
    if missing:
        raise ConfigError(f"hardware config misses cost entries: {', '.join(missing)}")


def load_hardware(path=None) -> HardwareConfig:
    """Read a hardware config file; the shipped default when path is None"""
    path = Path(path or config.DEFAULT_HARDWARE_CONFIG)
    return parse_hardware(path.read_text(encoding="utf-8"))
