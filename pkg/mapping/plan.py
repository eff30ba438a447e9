"""
Mapping Plans
Per-IMA floorplans built from the lowered blocks, with JSON export and import
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import ujson

import config
from data.hardware import HardwareConfig
from data.lowering import FbRequirement, fbs_by_ima, lower_to_fbs
from data.model_loader import ModelGraph, model_hash
from mapping.datamap import mapped_cells, replica_grid
from mapping.floorplan import (
    FbShape, Placement, SequencePair, balance_sizes, position_fbs, realize_placement,
)
from utils.errors import InvariantViolation, PlanFormatError

LOGGER = logging.getLogger(__name__)


@dataclass
class ImaPlan:
    """Floorplan of one array"""

    ima: int
    group: int
    part: Tuple[int, int, int, int]
    fbs: List[FbRequirement]
    sequence_pair: SequencePair
    shapes: List[FbShape]
    placements: List[Placement]

    def __post_init__(self):
        self._fb = {fb.fb_id: fb for fb in self.fbs}
        self._shape = {s.fb_id: s for s in self.shapes}
        self._placement = {p.fb_id: p for p in self.placements}

    def fb(self, fb_id: int) -> FbRequirement:
        return self._fb[fb_id]

    def shape(self, fb_id: int) -> FbShape:
        return self._shape[fb_id]

    def placement(self, fb_id: int) -> Placement:
        return self._placement[fb_id]

    def replicas(self, fb_id: int) -> int:
        rx, ry = replica_grid(self.fb(fb_id), self.shape(fb_id))
        return rx * ry

    def mapped_cells(self, fb_id: int) -> int:
        return mapped_cells(self.fb(fb_id), self.shape(fb_id))

    @property
    def total_mapped(self) -> int:
        return sum(self.mapped_cells(fb.fb_id) for fb in self.fbs)


@dataclass
class MappingPlan:
    model_name: str
    model_hash: str
    array: Tuple[int, int]
    imas: List[ImaPlan]
    canonical: bool = False
    literal: bool = False
    meta: Dict = field(default_factory=dict)

    @property
    def fbs(self) -> List[FbRequirement]:
        return [fb for ima in self.imas for fb in ima.fbs]

    def groups(self) -> Dict[int, List[ImaPlan]]:
        grouped: Dict[int, List[ImaPlan]] = {}
        for ima in self.imas:
            grouped.setdefault(ima.group, []).append(ima)
        return grouped

    def ima_of(self, fb_id: int) -> ImaPlan:
        for ima in self.imas:
            if any(fb.fb_id == fb_id for fb in ima.fbs):
                return ima
        raise KeyError(fb_id)


def plan_ima(ima: int, fbs: List[FbRequirement], array, canonical: bool, literal: bool) -> ImaPlan:
    sp = position_fbs(fbs, canonical=canonical)
    shapes = balance_sizes(fbs, array, literal=literal)
    placements = realize_placement(sp, shapes, array)
    return ImaPlan(ima=ima, group=fbs[0].group, part=fbs[0].part, fbs=list(fbs),
                   sequence_pair=sp, shapes=shapes, placements=placements)


def build_plan(graph: ModelGraph, hw: HardwareConfig,
               canonical: bool = config.ALG1_CANONICAL,
               literal: bool = config.THROUGHPUT_INDEX_LITERAL) -> MappingPlan:
    """
    Lower, position, balance and place every IMA of a model

    Args:
        graph (ModelGraph): Validated model
        hw (HardwareConfig): Target hardware
        canonical (bool): Right-of reading of the positioning else-branch
        literal (bool): Literal throughput index in size balancing

    Returns:
        MappingPlan: Complete plan
    """

    fbs = lower_to_fbs(graph, hw)
    imas = [plan_ima(ima, members, hw.array, canonical, literal)
            for ima, members in sorted(fbs_by_ima(fbs).items())]
    plan = MappingPlan(model_name=graph.name, model_hash=model_hash(graph), array=hw.array,
                       imas=imas, canonical=canonical, literal=literal)
    LOGGER.info("Mapped %s onto %d IMAs", graph.name, len(imas))
    return plan


def plan_to_dict(plan: MappingPlan) -> dict:
    imas = []
    for ima in plan.imas:
        entries = []
        for fb in ima.fbs:
            shape, place = ima.shape(fb.fb_id), ima.placement(fb.fb_id)
            entries.append({
                "fb_id": fb.fb_id,
                "op_kind": fb.op_kind,
                "layer_id": fb.layer_id,
                "fused_layer_id": fb.fused_layer_id,
                "accumulates_with": fb.accumulates_with,
                "required": [fb.bx, fb.by],
                "ops_per_layer": fb.ops_per_layer,
                "origin": list(place.origin),
                "extent": [shape.nx, shape.ny],
                "dataflow": fb.dataflow,
                "replicas": ima.replicas(fb.fb_id),
                "mapped_cells": ima.mapped_cells(fb.fb_id),
                "channels": list(fb.channels),
                "rows": list(fb.rows),
                "bits": fb.bits,
                "leaves": fb.leaves,
            })
        imas.append({
            "ima": ima.ima,
            "group": ima.group,
            "part": list(ima.part),
            "sequence_pair": {"seq1": list(ima.sequence_pair.seq1), "seq2": list(ima.sequence_pair.seq2)},
            "fbs": entries,
        })
    return {
        "version": config.PLAN_SCHEMA_VERSION,
        "model": plan.model_name,
        "model_hash": plan.model_hash,
        "array": list(plan.array),
        "alg1_canonical": plan.canonical,
        "throughput_index_literal": plan.literal,
        "imas": imas,
    }


def export_plan(plan: MappingPlan) -> str:
    """Plan as deterministic JSON text"""
    return ujson.dumps(plan_to_dict(plan), indent=2, sort_keys=True) + "\n"


def _load_ima(raw: dict, array) -> ImaPlan:
    part = tuple(raw["part"])
    group = int(raw["group"])
    fbs, shapes, placements = [], [], []
    for entry in raw["fbs"]:
        bx, by = entry["required"]
        fb = FbRequirement(
            fb_id=int(entry["fb_id"]), op_kind=str(entry["op_kind"]), bx=int(bx), by=int(by),
            ops_per_layer=int(entry["ops_per_layer"]), accumulates_with=entry["accumulates_with"],
            layer_id=int(entry["layer_id"]), fused_layer_id=entry["fused_layer_id"],
            group=group, ima=int(raw["ima"]), part=part, channels=tuple(entry["channels"]),
            rows=tuple(entry["rows"]), bits=int(entry["bits"]), leaves=int(entry["leaves"]),
        )
        fbs.append(fb)
        shapes.append(FbShape(fb.fb_id, *map(int, entry["extent"])))
        placements.append(Placement(fb.fb_id, tuple(entry["origin"]), tuple(map(int, entry["extent"]))))
    sp = SequencePair(tuple(raw["sequence_pair"]["seq1"]), tuple(raw["sequence_pair"]["seq2"]))
    for i, a in enumerate(placements):
        if not a.within(array):
            raise PlanFormatError(f"fb {a.fb_id} lies outside the array")
        for b in placements[i + 1:]:
            if a.overlaps(b):
                raise PlanFormatError(f"fb {a.fb_id} overlaps fb {b.fb_id}")
    return ImaPlan(ima=int(raw["ima"]), group=group, part=part, fbs=fbs, sequence_pair=sp,
                   shapes=shapes, placements=placements)


def import_plan(text: str) -> MappingPlan:
    """Parse a plan file written by export_plan"""

    try:
        doc = ujson.loads(text)
        if doc.get("version") != config.PLAN_SCHEMA_VERSION:
            raise PlanFormatError(f"unsupported plan version {doc.get('version')!r}")
        array = tuple(int(v) for v in doc["array"])
        imas = [_load_ima(raw, array) for raw in doc["imas"]]
        return MappingPlan(
            model_name=str(doc["model"]), model_hash=str(doc["model_hash"]), array=array, imas=imas,
            canonical=bool(doc.get("alg1_canonical", False)),
            literal=bool(doc.get("throughput_index_literal", False)),
        )
    except PlanFormatError:
        raise
    except (ValueError, KeyError, TypeError, AttributeError, InvariantViolation) as exc:
        raise PlanFormatError(f"plan file is malformed: {exc}") from exc
