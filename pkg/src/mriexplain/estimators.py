"""Scikit-learn style wrappers around the functional pipeline stages.

These estimators follow the sklearn parameter contract (``get_params`` /
``set_params``, constructor arguments stored verbatim) so they compose
with ``sklearn.pipeline`` and model-selection tooling by duck typing,
without making scikit-learn a dependency of this package.
"""

from __future__ import annotations

import inspect
from typing import List, Optional

from .atlas import map_rois
from .core import Atlas, BinaryMask, CoverageTable, Heatmap, RegionDescriptor, SegmentationResult
from .rois import extract_rois
from .segmentation import (
    SegmentationParams,
    closing,
    disk,
    percentile,
    remove_small_objects,
    segment_heatmap,
)

__all__ = ["ParamsMixin", "HeatmapSegmenter", "RoiExtractor", "AtlasRegionMapper"]


class ParamsMixin:
    """Minimal sklearn-compatible get_params/set_params implementation."""

    @classmethod
    def _param_names(cls) -> List[str]:
        sig = inspect.signature(cls.__init__)
        return [p for p in sig.parameters if p != "self"]

    def get_params(self, deep: bool = True) -> dict:
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params):
        valid = set(self._param_names())
        for key, value in params.items():
            if key not in valid:
                raise ValueError(f"invalid parameter {key!r} for {type(self).__name__}")
            setattr(self, key, value)
        return self

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v!r}" for k, v in self.get_params().items())
        return f"{type(self).__name__}({args})"


class HeatmapSegmenter(ParamsMixin):
    """Adaptive percentile thresholding as a fit/predict estimator.

    ``fit(heatmap, gt_mask)`` runs the Dice-maximizing percentile search
    and stores the full :class:`SegmentationResult`; ``predict(heatmap)``
    applies the fitted percentile (recomputed on the new heatmap's
    intensity distribution) followed by the same morphological
    post-processing.
    """

    def __init__(
        self,
        alpha_low: int = 70,
        alpha_high: int = 97,
        s_min: int = 50,
        r: int = 3,
        epsilon: float = 1e-6,
    ):
        self.alpha_low = alpha_low
        self.alpha_high = alpha_high
        self.s_min = s_min
        self.r = r
        self.epsilon = epsilon

    def _params(self) -> SegmentationParams:
        return SegmentationParams(
            alpha_range=(self.alpha_low, self.alpha_high),
            s_min=self.s_min,
            r=self.r,
            epsilon=self.epsilon,
        )

    def fit(self, X: Heatmap, y: BinaryMask) -> "HeatmapSegmenter":
        result = segment_heatmap(X, y, self._params())
        self.result_ = result
        self.alpha_star_ = result.alpha_star
        self.threshold_value_ = result.threshold_value
        return self

    def predict(self, X: Heatmap) -> BinaryMask:
        if not hasattr(self, "alpha_star_"):
            raise RuntimeError("HeatmapSegmenter is not fitted")
        mask = BinaryMask(X.values >= percentile(X, self.alpha_star_))
        mask = remove_small_objects(mask, self.s_min)
        return closing(mask, disk(self.r))

    def fit_predict(self, X: Heatmap, y: BinaryMask) -> BinaryMask:
        return self.fit(X, y).result_.mask

    def fit_result(self, X: Heatmap, y: BinaryMask) -> SegmentationResult:
        return self.fit(X, y).result_


class RoiExtractor(ParamsMixin):
    """Stateless transformer: binary mask in, region descriptors out."""

    def __init__(self):
        pass

    def fit(self, X: Optional[BinaryMask] = None, y=None) -> "RoiExtractor":
        return self

    def transform(self, X: BinaryMask) -> List[RegionDescriptor]:
        return extract_rois(X)


class AtlasRegionMapper(ParamsMixin):
    """Transformer tallying atlas-region coverage of a mask.

    ``slice_index=None`` selects the volume's mid slice.
    """

    def __init__(self, atlas: Optional[Atlas] = None, slice_index: Optional[int] = None):
        self.atlas = atlas
        self.slice_index = slice_index

    def fit(self, X: Optional[Atlas] = None, y=None) -> "AtlasRegionMapper":
        if X is not None:
            self.atlas = X
        if self.atlas is None:
            raise ValueError("AtlasRegionMapper needs an atlas (constructor arg or fit input)")
        return self

    def _slice(self) -> int:
        if self.slice_index is not None:
            return self.slice_index
        return self.atlas.dims[2] // 2

    def transform(self, X: BinaryMask) -> CoverageTable:
        if self.atlas is None:
            raise RuntimeError("AtlasRegionMapper is not fitted")
        return map_rois(X, self.atlas, self._slice())
