"""Run configuration loaded from a single JSON file."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .charts import FitOptions
from .diophantine import DiophantineParams
from .geometry import Rect
from .models import SymbolModel, model_from_config
from .monodromy import Covering
from .pipeline import SpectralSettings
from .spectrum import SynthesisOptions, check_regime


def _complex(v) -> complex:
    return complex(*v) if isinstance(v, (list, tuple)) else complex(v)


@dataclass(frozen=True)
class ClassicalLoop:
    """Circle traversed by the classical continuation oracle."""

    center: tuple = (0.0, 0.0)
    radius: float = 0.15
    points: int = 64
    chart_radius: float = 0.03
    start_angle: float = 0.0


@dataclass(frozen=True)
class MeasureConfig:
    box: tuple = (1.0, 2.0, 1.0, 2.0)
    samples: int = 100_000
    alphas: tuple = (0.1, 0.05, 0.025)


@dataclass(frozen=True)
class RunConfig:
    model: dict = field(default_factory=lambda: {"name": "champagne"})
    h: float = 1e-3
    eps: float = 1e-2
    delta: float = 0.5
    lam: float = 0.0
    C: float = 10.0
    grid: int = 40
    degree: int = 3
    link_radius: float = 0.05
    samples: int = 16
    alpha: float | None = 0.05
    d: float = 1.0
    k_max: int = 10_000
    jitter_exponent: int | None = 8
    eps2_coeff: complex = 0.0
    h_coeff: complex = 0.0
    correction_slope: tuple = (0.0, 0.0)
    covering: dict = field(default_factory=dict)
    loop: tuple = ()
    classical: ClassicalLoop = field(default_factory=ClassicalLoop)
    measure: MeasureConfig = field(default_factory=MeasureConfig)
    output_dir: str = "out"
    seed: int = 0

    def __post_init__(self):
        check_regime(self.h, self.eps, self.delta)
        if self.alpha is not None:
            self.params()  # validates alpha, d, k_max and lambda

    # -- derived objects ---------------------------------------------------
    def params(self) -> DiophantineParams | None:
        if self.alpha is None:
            return None
        p = DiophantineParams(self.alpha, self.d, self.k_max)
        from .diophantine import check_lambda

        check_lambda(self.lam, p)
        return p

    def build_model(self) -> SymbolModel:
        m = model_from_config(self.model)
        return m.with_perturbation(self.lam) if self.lam else m

    def synthesis_options(self) -> SynthesisOptions:
        return SynthesisOptions(
            jitter_exponent=self.jitter_exponent,
            eps2_coeff=self.eps2_coeff,
            h_coeff=self.h_coeff,
            correction_slope=tuple(self.correction_slope),
            seed=self.seed,
        )

    def settings(self) -> SpectralSettings:
        return SpectralSettings(
            h=self.h,
            eps=self.eps,
            delta=self.delta,
            C=self.C,
            grid=self.grid,
            degree=self.degree,
            link_radius=self.link_radius,
            samples=self.samples,
            options=self.synthesis_options(),
            fit=FitOptions(),
        )

    def build_covering(self) -> Covering:
        if not self.covering:
            raise ValueError("config has no covering")
        return Covering.from_dict(self.covering)

    def measure_box(self) -> Rect:
        return Rect(*map(float, self.measure.box))

    # -- serialization -----------------------------------------------------
    def to_dict(self, include_output: bool = True) -> dict:
        d = asdict(self)
        if not include_output:
            d.pop("output_dir")
        for key in ("eps2_coeff", "h_coeff"):
            z = complex(d[key])
            d[key] = [z.real, z.imag]
        d["loop"] = list(self.loop)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kw = dict(d)
        for key in ("eps2_coeff", "h_coeff"):
            if key in kw:
                kw[key] = _complex(kw[key])
        if "loop" in kw:
            kw["loop"] = tuple(kw["loop"])
        if "correction_slope" in kw:
            kw["correction_slope"] = tuple(kw["correction_slope"])
        if "classical" in kw:
            c = dict(kw["classical"])
            if "center" in c:
                c["center"] = tuple(c["center"])
            kw["classical"] = ClassicalLoop(**c)
        if "measure" in kw:
            m = dict(kw["measure"])
            for k in ("box", "alphas"):
                if k in m:
                    m[k] = tuple(m[k])
            kw["measure"] = MeasureConfig(**m)
        return cls(**kw)

    def with_overrides(self, **changes) -> "RunConfig":
        changes = {k: v for k, v in changes.items() if v is not None}
        return replace(self, **changes) if changes else self


def load_config(path) -> RunConfig:
    with open(Path(path)) as fh:
        return RunConfig.from_dict(json.load(fh))
