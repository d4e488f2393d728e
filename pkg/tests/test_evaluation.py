import random

import numpy as np
import pytest

from fusedetect.corpus import BinaryLabel
from fusedetect.errors import EmptyEvaluation, LengthMismatch
from fusedetect.evaluation import (
    ConfusionCounts,
    ExperimentResult,
    MatrixInputs,
    MetricSet,
    confusion,
    default_experiment_matrix,
    metrics,
    render_report,
    results_to_jsonl,
    run_experiment_matrix,
    run_multi_seed,
    summarize_multi_seed,
)
from fusedetect.features import Modality
from fusedetect.models import ExperimentSpec, HyperParams

from helpers import brute_force_metrics, build_matrix_fixture

M = BinaryLabel.MISINFORMATION
O = BinaryLabel.OTHER


class TestConfusion:
    def test_perfect_predictions(self):
        assert confusion([M, O], [M, O]) == ConfusionCounts(1, 0, 0, 1)

    def test_all_misses(self):
        assert confusion([M, M], [O, O]) == ConfusionCounts(0, 0, 2, 0)

    def test_hand_counted_mixed_case(self):
        got = confusion([M, O, M, O], [M, M, O, O])
        assert got == ConfusionCounts(tp=1, fp=1, fn=1, tn=1)

    def test_counts_partition_records(self):
        rng = random.Random(5)
        labels = [rng.choice([M, O]) for _ in range(37)]
        preds = [rng.choice([M, O]) for _ in range(37)]
        c = confusion(labels, preds)
        assert c.total == 37

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            confusion([M], [M, O])

    def test_empty_lists(self):
        with pytest.raises(EmptyEvaluation):
            confusion([], [])


class TestMetrics:
    def test_perfect(self):
        m = metrics(ConfusionCounts(1, 0, 0, 1))
        assert (m.accuracy, m.precision, m.recall, m.f1) == (1.0, 1.0, 1.0, 1.0)

    def test_all_positive_predictor_on_balanced_set(self):
        m = metrics(ConfusionCounts(1, 1, 0, 0))
        assert m.accuracy == 0.5
        assert m.precision == 0.25
        assert m.recall == 0.5
        assert m.f1 == pytest.approx(1 / 3)

    def test_uniform_confusion(self):
        m = metrics(ConfusionCounts(1, 1, 1, 1))
        assert (m.accuracy, m.precision, m.recall, m.f1) == (0.5, 0.5, 0.5, 0.5)

    def test_zero_total_rejected(self):
        with pytest.raises(EmptyEvaluation):
            metrics(ConfusionCounts(0, 0, 0, 0))

    def test_f1_zero_when_precision_and_recall_zero(self):
        m = metrics(ConfusionCounts(0, 5, 5, 0))
        assert m.precision == 0.0 and m.recall == 0.0 and m.f1 == 0.0

    def test_matches_brute_force_oracle_on_random_trials(self):
        rng = random.Random(99)
        for _ in range(200):
            n = rng.randint(1, 50)
            labels = [rng.choice([M, O]) for _ in range(n)]
            preds = [rng.choice([M, O]) for _ in range(n)]
            mine = metrics(confusion(labels, preds))
            oracle = brute_force_metrics(labels, preds)
            for key in ("accuracy", "precision", "recall", "f1"):
                assert abs(getattr(mine, key) - oracle[key]) <= 1e-12

    def test_accuracy_identity(self):
        rng = random.Random(1)
        for _ in range(50):
            c = ConfusionCounts(*(rng.randint(0, 20) for _ in range(4)))
            if c.total == 0:
                continue
            assert metrics(c).accuracy == pytest.approx(1 - (c.fp + c.fn) / c.total, abs=1e-15)

    def test_macro_symmetry_under_class_swap(self):
        rng = random.Random(7)
        swap = {M: O, O: M}
        for _ in range(50):
            n = rng.randint(1, 40)
            labels = [rng.choice([M, O]) for _ in range(n)]
            preds = [rng.choice([M, O]) for _ in range(n)]
            direct = metrics(confusion(labels, preds))
            flipped = metrics(confusion([swap[l] for l in labels], [swap[p] for p in preds]))
            assert direct.precision == pytest.approx(flipped.precision, abs=1e-15)
            assert direct.recall == pytest.approx(flipped.recall, abs=1e-15)
            assert direct.f1 == pytest.approx(flipped.f1, abs=1e-15)


@pytest.fixture(scope="module")
def fixture():
    return build_matrix_fixture()


class TestExperimentMatrix:
    def test_default_matrix_emits_fifteen_rows(self, fixture):
        dataset, inputs = fixture
        run = run_experiment_matrix(default_experiment_matrix(), dataset, inputs, seed=7)
        assert len(run.results) == 15
        assert not run.failures
        arity = {1: 0, 2: 0, 3: 0}
        for result in run.results:
            arity[len(result.modalities)] += 1
        assert arity == {1: 6, 2: 5, 3: 4}

    def test_shared_split_fingerprint_across_specs(self, fixture):
        dataset, inputs = fixture
        run = run_experiment_matrix(default_experiment_matrix(), dataset, inputs, seed=7)
        fingerprints = {r.split_fingerprint for r in run.results}
        assert fingerprints == {run.split_fingerprint}

    def test_unknown_backend_isolated_as_failure(self, fixture):
        dataset, inputs = fixture
        specs = default_experiment_matrix()
        specs[-1] = ExperimentSpec("broken", specs[-1].modalities, ("no-such-backend",), HyperParams())
        run = run_experiment_matrix(specs, dataset, inputs, seed=7)
        assert len(run.results) == 14
        assert len(run.failures) == 1
        assert run.failures[0].spec_name == "broken"
        assert "no-such-backend" in run.failures[0].error

    def test_rerun_with_same_seed_identical_metrics(self, fixture):
        dataset, inputs = fixture
        specs = default_experiment_matrix()
        a = run_experiment_matrix(specs, dataset, inputs, seed=11)
        b = run_experiment_matrix(specs, dataset, inputs, seed=11)
        assert [r.metrics for r in a.results] == [r.metrics for r in b.results]
        assert a.split_fingerprint == b.split_fingerprint

    def test_results_ordered_as_given(self, fixture):
        dataset, inputs = fixture
        specs = default_experiment_matrix()
        run = run_experiment_matrix(specs, dataset, inputs, seed=7)
        assert [r.spec_name for r in run.results] == [s.name for s in specs]

    def test_multi_seed_summary_shapes(self, fixture):
        dataset, inputs = fixture
        specs = default_experiment_matrix()[:2]
        runs = run_multi_seed(specs, dataset, inputs, seeds=[1, 2])
        summary = summarize_multi_seed(runs)
        assert set(summary) == {s.name for s in specs}
        mean, half_range = summary[specs[0].name]["f1"]
        assert 0.0 <= mean <= 1.0 and half_range >= 0.0


def result_row(name="trimodal", modalities=None, combo=("linear",), acc=0.59, p=0.60, r=0.59, f1=0.59):
    return ExperimentResult(
        spec_name=name,
        modalities=modalities or frozenset({Modality.TEXT, Modality.IMAGE, Modality.SOCIAL}),
        backend_combo=tuple(combo),
        metrics=MetricSet(accuracy=acc, precision=p, recall=r, f1=f1),
        seed=7,
        wallclock=0.1,
        split_fingerprint="abc",
    )


class TestRenderReport:
    def test_trimodal_row_rendering(self):
        text = render_report([result_row()], "table-text")
        assert "Text+Image+Social | linear | 0.59 | 0.60 | 0.59 | 0.59" in text

    def test_three_sections_present_even_when_empty(self):
        text = render_report([], "table-text")
        for section in ("== Unimodal ==", "== Bimodal ==", "== Trimodal =="):
            assert section in text

    def test_delimited_header_and_row(self):
        doc = render_report([result_row()], "delimited")
        lines = doc.strip().split("\n")
        assert lines[0] == "Modalities,Model,Accuracy,Precision,Recall,F1"
        assert lines[1] == "Text+Image+Social,linear,0.59,0.60,0.59,0.59"

    def test_rows_grouped_by_section_order(self):
        rows = [
            result_row("tri"),
            result_row("uni", modalities=frozenset({Modality.TEXT})),
            result_row("bi", modalities=frozenset({Modality.TEXT, Modality.SOCIAL})),
        ]
        doc = render_report(rows, "delimited")
        body = doc.strip().split("\n")[1:]
        assert body[0].startswith("Text,")
        assert body[1].startswith("Text+Social,")
        assert body[2].startswith("Text+Image+Social,")

    def test_rounding_is_half_even_fixed_point(self):
        row = result_row(acc=0.595, p=0.605, r=0.5, f1=0.5)
        doc = render_report([row], "delimited")
        cells = doc.strip().split("\n")[1].split(",")
        assert cells[2] in ("0.59", "0.60")
        assert cells[2] == f"{0.595:.2f}"
        assert cells[3] == f"{0.605:.2f}"

    def test_unknown_format_rejected(self):
        with pytest.raises(ValueError):
            render_report([], "xml")

    def test_results_jsonl_contains_detail(self, ):
        from fusedetect.evaluation import MatrixRun

        run = MatrixRun(results=(result_row(),), failures=(), seed=7, split_fingerprint="abc")
        doc = results_to_jsonl(run)
        assert '"spec_name": "trimodal"' in doc
        assert '"split_fingerprint": "abc"' in doc
