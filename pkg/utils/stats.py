"""
Utilization and Cost Accounting
Spatial/temporal utilization and energy/area reports over plans and traces
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np
import pandas as pd

import config
from data.hardware import HardwareConfig
from mapping.plan import MappingPlan

LOGGER = logging.getLogger(__name__)

USAGE_COLUMNS = ["layer_id", "kind", "arrays", "array_rows", "array_cols", "mapped_cells", "allocated_cells"]


@dataclass
class UtilizationReport:
    """
    Spatial utilization per layer and temporal utilization per cycle

    spatial is a DataFrame with one row per GEMM layer; temporal holds the
    activated fraction of every cycle, idle cycles included.
    """

    spatial: pd.DataFrame = field(default_factory=lambda: pd.DataFrame(columns=USAGE_COLUMNS + ["utilization"]))
    temporal: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def spatial_mean(self) -> float:
        return float(self.spatial["utilization"].mean()) if len(self.spatial) else 0.0

    @property
    def spatial_std(self) -> float:
        return float(self.spatial["utilization"].std(ddof=0)) if len(self.spatial) else 0.0

    @property
    def spatial_aggregate(self) -> float:
        """Cell-weighted utilization over every allocated array"""
        allocated = self.spatial["allocated_cells"].sum() if len(self.spatial) else 0
        return float(self.spatial["mapped_cells"].sum() / allocated) if allocated else 0.0

    @property
    def temporal_mean(self) -> float:
        return float(self.temporal.mean()) if self.temporal.size else 0.0

    def summary(self) -> Dict[str, float]:
        digits = config.UTILIZATION_DECIMALS
        return {
            "spatial_mean": round(self.spatial_mean, digits),
            "spatial_std": round(self.spatial_std, digits),
            "spatial_aggregate": round(self.spatial_aggregate, digits),
            "temporal_mean": round(self.temporal_mean, digits),
            "cycles": int(self.temporal.size),
        }


def plan_usage(plan: MappingPlan, graph=None) -> pd.DataFrame:
    """Mapped and allocated cells of every layer group in a plan"""
    rows, cols = plan.array
    records = []
    for index, imas in sorted(plan.groups().items()):
        gemm = imas[0].fbs[0]
        records.append({
            "layer_id": gemm.layer_id,
            "kind": graph.layer(gemm.layer_id).kind if graph is not None else gemm.op_kind,
            "arrays": len(imas),
            "array_rows": rows,
            "array_cols": cols,
            "mapped_cells": sum(ima.total_mapped for ima in imas),
            "allocated_cells": len(imas) * rows * cols,
        })
    return pd.DataFrame(records, columns=USAGE_COLUMNS)


def spatial_utilization(usage: pd.DataFrame) -> pd.DataFrame:
    """
    Per-layer spatial utilization

    Args:
        usage (pd.DataFrame): Rows with mapped_cells and allocated_cells per layer

    Returns:
        pd.DataFrame: usage plus a utilization column in [0, 1]
    """

    frame = usage.copy()
    allocated = frame["allocated_cells"].astype(float)
    frame["utilization"] = np.where(allocated > 0, frame["mapped_cells"] / allocated.where(allocated > 0, 1), 0.0)
    if (frame["utilization"] > 1.0).any():
        LOGGER.warning("Layers %s map more cells than allocated",
                       frame.loc[frame["utilization"] > 1.0, "layer_id"].tolist())
    return frame


def temporal_utilization(trace) -> np.ndarray:
    """Activated cells over all cells of the run, per cycle"""
    if trace.total_cycles == 0 or trace.array_cells == 0:
        return np.zeros(trace.total_cycles)
    share = trace.activity() / trace.array_cells
    if (share > 1.0).any():
        LOGGER.warning("Cycles %s activate more cells than the arrays hold",
                       np.flatnonzero(share > 1.0)[:10].tolist())
    return np.minimum(share, 1.0)


def utilization_report(usage: pd.DataFrame, trace) -> UtilizationReport:
    return UtilizationReport(spatial=spatial_utilization(usage), temporal=temporal_utilization(trace))


@dataclass
class CostReport:
    """Energy (pJ) and area (mm2) split by component"""

    energy: Dict[str, float]
    area: Dict[str, float]
    cycles: int
    label: str = ""

    @property
    def energy_total(self) -> float:
        return float(sum(self.energy.values()))

    @property
    def area_total(self) -> float:
        return float(sum(self.area.values()))

    def shares(self) -> Dict[str, float]:
        """Fractions of energy and area spent in the OR and the controller"""
        e, a = self.energy_total or 1.0, self.area_total or 1.0
        return {
            "or_energy_share": self.energy.get("or_access", 0.0) / e,
            "or_area_share": self.area.get("or", 0.0) / a,
            "controller_energy_share": self.energy.get("controller_cycle", 0.0) / e,
            "controller_area_share": self.area.get("controller", 0.0) / a,
        }

    def relative_to(self, baseline: "CostReport") -> Dict[str, float]:
        """Efficiency of this run over a baseline run of the same model"""
        speedup = baseline.cycles / self.cycles if self.cycles else 0.0
        energy = baseline.energy_total / self.energy_total if self.energy_total else 0.0
        area = (baseline.cycles * baseline.area_total) / (self.cycles * self.area_total) \
            if self.cycles and self.area_total else 0.0
        return {"speedup": speedup, "energy_efficiency": energy, "area_efficiency": area}


# event column -> energy component
_EVENT_COSTS = {
    "dac_drives": "dac",
    "cell_reads": "cell_read",
    "cell_writes": "cell_write",
    "sna_ops": "sna",
    "logic_ops": "logic_op",
    "or_accesses": "or_access",
    "ir_accesses": "ir_access",
    "movement_bytes": "edram_byte",
    "digital_ops": "digital_op",
}


def _array_area(hw: HardwareConfig, rows: int, cols: int) -> Dict[str, float]:
    return {
        "adc": hw.adc_for(cols).area_mm2,
        "dac": hw.area("dac") * rows,
        "cell": hw.area("cell") * rows * cols,
        "sna": hw.area("sna"),
        "or": hw.area("or"),
        "ir": hw.area("ir"),
        "controller": hw.area("controller"),
    }


def cost_report(trace, hw: HardwareConfig, label: str = "") -> CostReport:
    """
    Energy and area of one run

    Energy sums the trace's event counts times their unit cost plus one
    controller cycle per array per cycle. Area sums the static components of
    every array the run used; HURRY arrays carry a softmax LUT and baseline
    arrays a digital unit.

    Args:
        trace (PipelineTrace): Run trace, meta names the arrays by size
        hw (HardwareConfig): Unit costs
        label (str): Name of the run

    Returns:
        CostReport: Energy and area by component
    """

    events = trace.events()
    by_size: Dict[int, int] = trace.meta.get("arrays_by_size") or {hw.array_cols: trace.arrays}
    row_of: Dict[int, int] = trace.meta.get("array_rows") or {size: size for size in by_size}
    adc_by_size: Optional[Dict[int, int]] = trace.meta.get("adc_by_size")
    if adc_by_size is None:
        adc_by_size = {max(by_size): events["adc_conversions"]}

    energy = {"adc": sum(n * hw.adc_for(size).energy_pj for size, n in adc_by_size.items())}
    for column, component in _EVENT_COSTS.items():
        energy[component] = events[column] * hw.energy(component)
    energy["controller_cycle"] = trace.total_cycles * sum(by_size.values()) * hw.energy("controller_cycle")

    area: Dict[str, float] = {}
    extra = "digital_unit" if trace.meta.get("mode", "hurry") != "hurry" else "lut"
    for size, count in by_size.items():
        for component, value in _array_area(hw, row_of.get(size, size), size).items():
            area[component] = area.get(component, 0.0) + value * count
        area[extra] = area.get(extra, 0.0) + hw.area(extra) * count
    area["edram"] = hw.area("edram")
    return CostReport(energy=energy, area=area, cycles=trace.total_cycles, label=label or trace.meta.get("mode", ""))


def adc_tradeoff(hw: HardwareConfig, size: int = 128, reference: int = 512) -> Dict[str, float]:
    """
    ADC power and area of the small arrays covering one reference array

    Returns:
        dict: count, power_ratio, area_ratio
    """

    count = (reference // size) ** 2
    small, big = hw.adc_for(size), hw.adc_for(reference)
    return {
        "array_size": size,
        "count": count,
        "adc_bits": small.bits,
        "power_ratio": count * small.power_mw / big.power_mw,
        "area_ratio": count * small.area_mm2 / big.area_mm2,
    }
