"""End-to-end spectral monodromy: synthesize, fit per open set, build the cocycle."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Mapping

import numpy as np

from . import gl2z
from .charts import FitOptions, PseudoChart, assemble_pseudo_chart
from .diophantine import DiophantineParams
from .errors import InsufficientPoints
from .models import SymbolModel
from .monodromy import Covering, TransitionCocycle, build_cocycle, holonomy
from .spectrum import SpectrumCloud, SynthesisOptions, synthesize_band


@dataclass(frozen=True)
class SpectralSettings:
    h: float = 1e-3
    eps: float = 1e-2
    delta: float = 0.5
    C: float = 10.0
    grid: int = 40
    degree: int = 3
    link_radius: float = 0.05
    samples: int = 16
    options: SynthesisOptions = field(default_factory=SynthesisOptions)
    fit: FitOptions = field(default_factory=FitOptions)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["options"] = self.options.to_dict()
        return d


@dataclass
class SpectralRun:
    cloud: SpectrumCloud
    charts: dict
    cocycle: TransitionCocycle
    holonomy: gl2z.HolonomyClass | None


def cloud_anchors(cloud: SpectrumCloud) -> np.ndarray:
    """Rectangle anchors recorded in the provenance, else those owning points."""
    recorded = cloud.provenance.get("anchors") if cloud.provenance else None
    if recorded:
        return np.atleast_2d(np.asarray(recorded, dtype=float))
    if cloud.anchors is None or len(cloud.anchors) == 0:
        return np.empty((0, 2))
    return np.unique(np.asarray(cloud.anchors, dtype=float), axis=0)


def synthesize_covering(model: SymbolModel, covering: Covering, settings: SpectralSettings, params) -> SpectrumCloud:
    return synthesize_band(
        model,
        covering,
        settings.eps,
        settings.h,
        settings.delta,
        params,
        settings.grid,
        settings.C,
        settings.options,
    )


def _reference_index(anchors: np.ndarray) -> int:
    centre = anchors.mean(axis=0)
    return int(np.argmin(np.linalg.norm(anchors - centre, axis=1)))


def fit_covering(
    cloud: SpectrumCloud,
    covering: Covering,
    settings: SpectralSettings,
    reference_charts: Mapping[str, PseudoChart] | None = None,
) -> dict:
    """One pseudo-chart per open set from the anchors that fall inside it.

    With ``reference_charts`` each new chart takes its integer frame from the
    matching reference chart, so matrices of different runs are comparable.
    """
    anchors = cloud_anchors(cloud)
    charts = {}
    for ident, dom in covering.opens:
        mine = anchors[dom.contains(anchors)] if len(anchors) else anchors
        if len(mine) < 3:
            raise InsufficientPoints(f"open set {ident!r} holds {len(mine)} anchors, need 3", open=ident)
        ref = _reference_index(mine)
        frame = None
        if reference_charts is not None and ident in reference_charts:
            frame = reference_charts[ident].differential(mine[ref][None, :])[0]
        charts[ident] = assemble_pseudo_chart(
            cloud,
            mine,
            settings.h,
            settings.eps,
            C=settings.C,
            delta=settings.delta,
            degree=settings.degree,
            link_radius=settings.link_radius,
            frame=frame,
            reference=ref,
            domain=dom,
            fit_options=settings.fit,
            name=ident,
        )
    return charts


def spectral_monodromy(
    model: SymbolModel,
    covering: Covering,
    loop,
    settings: SpectralSettings,
    params: DiophantineParams | None,
    reference_charts: Mapping[str, PseudoChart] | None = None,
) -> SpectralRun:
    cloud = synthesize_covering(model, covering, settings, params)
    charts = fit_covering(cloud, covering, settings, reference_charts)
    cocycle = build_cocycle(charts, covering, settings.samples)
    hol = holonomy(cocycle, loop) if loop else None
    return SpectralRun(cloud, charts, cocycle, hol)
