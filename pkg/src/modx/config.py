"""Merged pipeline configuration: defaults, config documents, flag overrides."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Mapping

from .detector import DetectorConfig
from .features import FeatureConfig
from .modularize import ModularizerConfig
from .similarity import ChannelWeights
from .tpldb import configs_from_params, make_build_params
from .weighting import PropagationConfig

CONFIG_ENV_VAR = "MODX_CONFIG"


@dataclass(frozen=True)
class GlobalConfig:
    propagation: PropagationConfig
    modularizer: ModularizerConfig
    features: FeatureConfig
    weights: ChannelWeights
    detector: DetectorConfig

    @classmethod
    def default(cls) -> "GlobalConfig":
        return cls(
            propagation=PropagationConfig(),
            modularizer=ModularizerConfig(),
            features=FeatureConfig(),
            weights=ChannelWeights(),
            detector=DetectorConfig(),
        )

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "GlobalConfig":
        """Build from a config document; unknown keys are ignored."""
        pc, mc, fc, cw = configs_from_params(doc)
        det = doc.get("detector", {})
        dc = DetectorConfig(
            **{
                k: v
                for k, v in det.items()
                if k in {"tau_match", "margin_delta", "theta_lib", "top_k"}
            }
        )
        return cls(pc, mc, fc, cw, dc)

    @classmethod
    def from_file(cls, path: str | Path) -> "GlobalConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_dict(self) -> dict[str, Any]:
        doc = make_build_params(
            self.propagation, self.modularizer, self.features, self.weights
        )
        doc["detector"] = {
            "tau_match": self.detector.tau_match,
            "margin_delta": self.detector.margin_delta,
            "theta_lib": self.detector.theta_lib,
            "top_k": self.detector.top_k,
        }
        return doc

    def override(self, section: str, **updates: Any) -> "GlobalConfig":
        """New config with the given fields of one section replaced."""
        current = getattr(self, section)
        return replace(self, **{section: replace(current, **updates)})
