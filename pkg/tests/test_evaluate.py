import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from horizoncast.data import Entity, PanelDataset
from horizoncast.evaluate import compare_reports, emit_outputs, horizon_mae
from horizoncast.exceptions import DataError
from horizoncast.models import ForecastResult, forecast_persistence


def truth_panel(series: dict[str, list[float]], start_time=0):
    entities = []
    for eid, values in series.items():
        arr = np.asarray(values, dtype=float)[:, None]
        entities.append(
            Entity(
                entity_id=eid,
                times=np.arange(start_time, start_time + len(values), dtype=np.int64),
                rows=arr,
                missing=np.isnan(arr),
            )
        )
    return PanelDataset(entities, ["y"], 0)


def fc(eid, values, start_time):
    values = np.asarray(values, dtype=float)
    return ForecastResult(
        entity_id=eid,
        values=values,
        times=np.arange(start_time, start_time + len(values), dtype=np.int64),
    )


class TestHorizonMae:
    def test_perfect_forecast_zero_curve(self):
        truth = truth_panel({"a": [1.0, 2.0, 3.0]})
        report = horizon_mae([fc("a", [1.0, 2.0, 3.0], 0)], truth)
        assert report.mae_curve.tolist() == [0.0, 0.0, 0.0]
        assert report.overall_mae == 0.0

    def test_single_entity_curve(self):
        truth = truth_panel({"a": [0.0, 0.0, 0.0]})
        report = horizon_mae([fc("a", [1.0, 2.0, 3.0], 0)], truth)
        assert report.mae_curve.tolist() == [1.0, 2.0, 3.0]
        assert report.overall_mae == pytest.approx(2.0)

    def test_cross_entity_mean(self):
        truth = truth_panel({"a": [0.0], "b": [0.0]})
        report = horizon_mae([fc("a", [1.0], 0), fc("b", [3.0], 0)], truth)
        assert report.mae_curve.tolist() == [2.0]
        assert report.n_per_step.tolist() == [2]

    def test_dropout_entities_partial_steps(self):
        truth = truth_panel({"a": [0.0, 0.0, 0.0], "b": [0.0]})
        report = horizon_mae([fc("a", [1.0, 1.0, 1.0], 0), fc("b", [3.0, 3.0, 3.0], 0)], truth)
        assert report.n_per_step.tolist() == [2, 1, 1]
        assert report.mae_curve.tolist() == [2.0, 1.0, 1.0]

    def test_missing_truth_cell_excluded(self):
        truth = truth_panel({"a": [0.0, float("nan"), 0.0]})
        report = horizon_mae([fc("a", [1.0, 1.0, 1.0], 0)], truth)
        assert report.n_per_step.tolist() == [1, 0, 1]

    def test_no_overlap_rejected(self):
        truth = truth_panel({"a": [0.0]})
        with pytest.raises(DataError):
            horizon_mae([fc("zzz", [1.0], 0)], truth)

    def test_mixed_horizons_rejected(self):
        truth = truth_panel({"a": [0.0, 0.0]})
        with pytest.raises(DataError):
            horizon_mae([fc("a", [1.0], 0), fc("a", [1.0, 2.0], 0)], truth)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(min_value=-100, max_value=100, allow_nan=False))
    def test_translation_invariance(self, shift):
        rng = np.random.default_rng(0)
        base_truth = rng.normal(size=5)
        base_fc = rng.normal(size=5)
        r1 = horizon_mae([fc("a", base_fc, 0)], truth_panel({"a": base_truth.tolist()}))
        r2 = horizon_mae(
            [fc("a", (base_fc + shift).tolist(), 0)],
            truth_panel({"a": (base_truth + shift).tolist()}),
        )
        assert np.allclose(r1.mae_curve, r2.mae_curve, atol=1e-9)

    def test_persistence_on_constant_target_is_zero(self):
        entity = Entity(
            "c", np.arange(4, dtype=np.int64), np.full((4, 1), 7.0), np.zeros((4, 1), dtype=bool)
        )
        truth = truth_panel({"c": [7.0] * 10})
        history = Entity("c", entity.times, entity.rows, entity.missing)
        report = horizon_mae([forecast_persistence(history, 6, 0)], truth)
        assert np.all(report.mae_curve == 0.0)


class TestCompareReports:
    @staticmethod
    def _report(label, errors_per_step, n=1):
        truth = truth_panel({f"e{i}": [0.0] * len(errors_per_step) for i in range(n)})
        fcs = [fc(f"e{i}", errors_per_step, 0) for i in range(n)]
        return horizon_mae(fcs, truth, label=label)

    def test_single_report_ratio_one(self):
        table = compare_reports([self._report("only", [1.0, 2.0])])
        assert table.ratio_to_first["only"] == 1.0

    def test_half_error_ratio(self):
        a = self._report("a", [2.0, 2.0])
        b = self._report("b", [1.0, 1.0])
        table = compare_reports([a, b])
        assert table.ratio_to_first["b"] == pytest.approx(0.5)
        assert table.per_step_winner == ["b", "b"]

    def test_identical_reports_tie(self):
        a = self._report("a", [1.0, 1.0])
        b = self._report("b", [1.0, 1.0])
        table = compare_reports([a, b])
        assert table.ratio_to_first == {"a": 1.0, "b": 1.0}
        assert table.per_step_winner == [None, None]

    def test_mismatched_horizon_rejected(self):
        with pytest.raises(DataError):
            compare_reports([self._report("a", [1.0]), self._report("b", [1.0, 2.0])])

    def test_ordering_only_changes_baseline(self):
        a = self._report("a", [2.0])
        b = self._report("b", [1.0])
        t1 = compare_reports([a, b])
        t2 = compare_reports([b, a])
        assert t1.ratio_to_first["b"] == pytest.approx(0.5)
        assert t2.ratio_to_first["a"] == pytest.approx(2.0)


class TestEmitOutputs:
    @staticmethod
    def _reports():
        truth = truth_panel({"a": [0.0] * 4, "b": [0.0] * 4})
        r1 = horizon_mae([fc("a", [1.0] * 4, 0), fc("b", [2.0] * 4, 0)], truth, label="base")
        r2 = horizon_mae([fc("a", [0.5] * 4, 0), fc("b", [1.0] * 4, 0)], truth, label="better")
        return [r1, r2]

    def test_files_and_row_counts(self, tmp_path):
        reports = self._reports()
        written = emit_outputs(reports, tmp_path)
        names = {p.name for p in written}
        assert names == {
            "mae_curve_base.csv",
            "per_entity_base.csv",
            "mae_curve_better.csv",
            "per_entity_better.csv",
            "summary.json",
        }
        curve_lines = (tmp_path / "mae_curve_base.csv").read_text().strip().splitlines()
        assert len(curve_lines) == 5  # header + 4 steps

    def test_rerun_byte_identical(self, tmp_path):
        reports = self._reports()
        d1, d2 = tmp_path / "r1", tmp_path / "r2"
        emit_outputs(reports, d1)
        emit_outputs(reports, d2)
        for p in sorted(d1.iterdir()):
            assert p.read_bytes() == (d2 / p.name).read_bytes()

    def test_summary_consistent_with_curves(self, tmp_path):
        reports = self._reports()
        emit_outputs(reports, tmp_path)
        summary = json.loads((tmp_path / "summary.json").read_text())
        for report in reports:
            weighted = float(
                np.nansum(report.mae_curve * report.n_per_step) / report.n_per_step.sum()
            )
            assert summary["overall_mae"][report.label] == pytest.approx(weighted, abs=1e-12)
