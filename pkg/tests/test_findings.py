import json

import numpy as np
import pytest

from mriexplain.core import BinaryMask, CoverageRow, CoverageTable, SegmentationResult
from mriexplain.findings import (
    FindingsDocument,
    FindingsValidationError,
    Provenance,
    Region,
    SegmentationMetrics,
    build_findings,
    load_schema,
    validate_findings,
)


def make_coverage() -> CoverageTable:
    return CoverageTable(
        rows=(
            CoverageRow(29, "Cingulate Gyrus, anterior division", 75, 64.102564102564102),
            CoverageRow(2, "Insular Cortex", 38, 32.478632478632478),
            CoverageRow(30, "Cingulate Gyrus, posterior division", 2, 1.7094017094017095),
            CoverageRow(42, "Central Opercular Cortex", 2, 1.7094017094017095),
        )
    )


def make_seg() -> SegmentationResult:
    return SegmentationResult(
        mask=BinaryMask(np.ones((4, 4), dtype=bool)),
        alpha_star=88.0,
        threshold_value=0.42,
        dsc=0.384,
        iou=0.259,
    )


def make_provenance() -> Provenance:
    return Provenance(
        source_image_id="sample-001",
        atlas_id="harvard-oxford-cortical",
        slice_index=2,
        created_at="2026-08-08T00:00:00+00:00",
    )


def make_doc(**overrides) -> FindingsDocument:
    kwargs = dict(
        model_name="InceptionResNetV2",
        predicted_class="Meningioma",
        saliency_method="GradCAMpp",
        coverage=make_coverage(),
        seg=make_seg(),
        provenance=make_provenance(),
        prediction_confidence=0.93,
    )
    kwargs.update(overrides)
    return build_findings(**kwargs)


class TestBuildFindings:
    def test_regions_copied_in_coverage_order(self):
        doc = make_doc()
        assert [r.name for r in doc.regions][0] == "Cingulate Gyrus, anterior division"
        assert doc.regions[0].percentage == 64.1
        assert doc.regions[1].percentage == 32.48

    def test_empty_coverage_gets_note(self):
        doc = make_doc(coverage=CoverageTable(rows=()))
        assert doc.regions == ()
        assert doc.note == "no atlas-region overlap"

    def test_metrics_copied(self):
        doc = make_doc()
        assert doc.segmentation_metrics == SegmentationMetrics(dsc=0.384, iou=0.259, alpha_star=88.0)

    def test_bad_class_rejected(self):
        with pytest.raises(ValueError):
            make_doc(predicted_class="Sarcoma")

    def test_bad_method_rejected(self):
        with pytest.raises(ValueError):
            make_doc(saliency_method="LIME")

    def test_confidence_range(self):
        with pytest.raises(ValueError):
            make_doc(prediction_confidence=1.5)


class TestSerialization:
    def test_round_trip_identity(self):
        doc = make_doc()
        text = doc.to_json()
        assert validate_findings(text) == doc

    def test_canonical_bytes_stable(self):
        assert make_doc().to_json() == make_doc().to_json()

    def test_percentages_have_two_decimals(self):
        text = make_doc().to_json()
        assert '"percentage": 64.10' in text
        assert '"percentage": 32.48' in text
        assert '"percentage": 1.71' in text

    def test_schema_validates_own_output(self):
        data = json.loads(make_doc().to_json())
        import jsonschema

        jsonschema.Draft202012Validator(load_schema()).validate(data)

    def test_optional_confidence_omitted(self):
        doc = make_doc(prediction_confidence=None)
        assert "prediction_confidence" not in json.loads(doc.to_json())
        assert validate_findings(doc.to_json()) == doc

    def test_key_order_fixed(self):
        keys = list(json.loads(make_doc().to_json()).keys())
        assert keys == [
            "schema_version",
            "model_name",
            "predicted_class",
            "prediction_confidence",
            "saliency_method",
            "regions",
            "segmentation_metrics",
            "provenance",
        ]


class TestValidateFindings:
    def test_out_of_range_percentage_pointer(self):
        data = json.loads(make_doc().to_json())
        data["regions"][0]["percentage"] = 120.0
        with pytest.raises(FindingsValidationError) as err:
            validate_findings(json.dumps(data))
        assert any(ptr == "/regions/0/percentage" for ptr, _ in err.value.errors)

    def test_missing_saliency_method_named(self):
        data = json.loads(make_doc().to_json())
        del data["saliency_method"]
        with pytest.raises(FindingsValidationError) as err:
            validate_findings(json.dumps(data))
        assert any("saliency_method" in msg for _, msg in err.value.errors)

    def test_multiple_errors_collected(self):
        data = json.loads(make_doc().to_json())
        del data["saliency_method"]
        data["regions"][0]["percentage"] = -3
        data["segmentation_metrics"]["dsc"] = 7
        with pytest.raises(FindingsValidationError) as err:
            validate_findings(json.dumps(data))
        assert len(err.value.errors) >= 3

    def test_malformed_json(self):
        with pytest.raises(json.JSONDecodeError):
            validate_findings("{not json")

    def test_unknown_key_rejected(self):
        data = json.loads(make_doc().to_json())
        data["surprise"] = 1
        with pytest.raises(FindingsValidationError):
            validate_findings(json.dumps(data))


class TestGeneratedCorpus:
    def test_round_trip_and_stability_on_many_documents(self):
        rng = np.random.default_rng(99)
        names = ["Frontal Pole", "Insular Cortex", "Angular Gyrus", "Lingual Gyrus", "Cuneal Cortex"]
        for i in range(100):
            k = int(rng.integers(0, 5))
            counts = sorted((int(c) for c in rng.integers(1, 500, size=k)), reverse=True)
            total = sum(counts)
            rows = tuple(
                CoverageRow(j + 1, names[j], c, c / total * 100.0)
                for j, c in enumerate(counts)
            )
            doc = build_findings(
                model_name=f"backbone-{i}",
                predicted_class=["Glioma", "Meningioma", "PituitaryTumor"][i % 3],
                saliency_method=["GradCAM", "GradCAMpp", "ScoreCAM"][i % 3],
                coverage=CoverageTable(rows=rows),
                seg=SegmentationResult(
                    mask=BinaryMask(np.ones((2, 2), dtype=bool)),
                    alpha_star=float(rng.integers(70, 98)),
                    threshold_value=float(rng.random()),
                    dsc=float(rng.random()),
                    iou=float(rng.random() * 0.5),
                ),
                provenance=make_provenance(),
                prediction_confidence=float(rng.random()) if i % 2 else None,
            )
            text = doc.to_json()
            assert text == doc.to_json()
            assert validate_findings(text) == doc
