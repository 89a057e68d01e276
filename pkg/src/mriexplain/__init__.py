"""mriexplain: saliency-to-report explainability pipeline for brain MRI.

Converts CNN saliency heatmaps into binary tumor masks, maps them onto a
labeled brain atlas, encodes the findings as grounded JSON, obtains an
LLM-written narrative report, and scores both the segmentation and the
narrative.
"""

from .core import (
    Atlas,
    BinaryMask,
    CoverageRow,
    CoverageTable,
    Heatmap,
    LabelGrid,
    RegionDescriptor,
    SegmentationResult,
    UnknownAtlasLabelWarning,
    validate_heatmap,
)
from .segmentation import (
    SegmentationParams,
    closing,
    dice,
    disk,
    iou,
    percentile,
    remove_small_objects,
    segment_heatmap,
    threshold_at,
)
from .rois import extract_rois, label_components, region_props
from .atlas import extract_slice, map_rois, resample_nearest
from .textmetrics import (
    ClassificationReport,
    ConfusionMatrix,
    TermFrequencyEmbedder,
    TextMetricsReport,
    classification_metrics,
    coherence,
    fres,
    maas,
    text_report,
    tokenize,
    ttr,
)
from .findings import (
    FindingsDocument,
    FindingsValidationError,
    Provenance,
    Region,
    SegmentationMetrics,
    build_findings,
    validate_findings,
)
from .report import (
    GeneratedReport,
    GroundingViolation,
    LlmEndpointConfig,
    build_prompt,
    generate_report,
    ground_check,
)
from .estimators import AtlasRegionMapper, HeatmapSegmenter, RoiExtractor
from . import formats

__version__ = "0.1.0"
