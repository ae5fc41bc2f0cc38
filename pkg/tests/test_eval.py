"""Evaluation harness: metrics, simulated control, refinement, sweep,
stimulus export, plot tables."""

import json

import numpy as np
import pytest

from control_studio.corpus import CorpusProfile, generate_corpus, transplant_pairs
from control_studio.evalsim import (
    ControlTrial, EvalContext, ProtocolError, bootstrap_ci, crude_control,
    export_stimuli, iterative_refinement, random_slots, rmse, rmse_per_stream,
    robustness_sweep, simulate_control, spearman_rho,
)
from control_studio.evalsim.report import (
    PLOT_COLUMNS, contour_rows, refinement_rows, sweep_report_from_json,
    sweep_report_to_json, sweep_rows, traces_from_json, traces_to_json,
    write_contour_table, write_plot_table,
)
from control_studio.models import ModelConfig
from control_studio.training import TrainSchedule, train

TINY = CorpusProfile(sentences=16, speakers=4, styles=2, test_sentences=4,
                     val_sentences=2, renditions_per_test=4, renditions_per_train=2,
                     t_min=5, t_max=8, phone_vocab=10)


def tiny_config(family):
    # dims chosen so the masked encoder can actually hit parameter parity
    return ModelConfig.build(
        family, phone_vocab=10, speaker_count=4, style_count=2,
        phone_dim=16, gru_widths=(4, 4), perceptron_dim=4, speaker_dim=4, style_dim=2,
        instance_dim=8, value_dim=4, gate_dim=12, stream_dim=4, pos_dim=4, latent_dim=4,
        masked_rnn_layers=1)


@pytest.fixture(scope="module")
def corpus():
    return generate_corpus(5, TINY)


@pytest.fixture(scope="module")
def bundles(corpus):
    out = {}
    for family in ("micvae", "nocontrol", "masked"):
        out[family] = train(corpus, tiny_config(family), TrainSchedule(epochs=1, seed=2))
    return out


@pytest.fixture(scope="module")
def ctx(corpus, bundles):
    return EvalContext(corpus, bundles["micvae"].stats)


# --- rmse ------------------------------------------------------------------

def test_rmse_zero_iff_equal():
    a = np.random.default_rng(0).normal(size=(4, 3))
    assert rmse(a, a) == 0.0
    assert rmse(a, a + 1.0) == pytest.approx(1.0)


def test_rmse_hand_example():
    pred = np.array([[0.0, 0.0, 0.0]])
    truth = np.array([[3.0, 4.0, 0.0]])
    assert rmse(pred, truth) == pytest.approx(np.sqrt(25.0 / 3.0))
    assert rmse(pred, truth) == pytest.approx(2.886751345948129)
    per = rmse_per_stream(pred, truth)
    assert per["f0"] == pytest.approx(3.0) and per["duration"] == 0.0


def test_rmse_metric_properties():
    rng = np.random.default_rng(1)
    a, b = rng.normal(size=(5, 3)), rng.normal(size=(5, 3))
    assert rmse(a, b) == pytest.approx(rmse(b, a))
    assert rmse(a, b) > 0
    with pytest.raises(ValueError):
        rmse(a, np.zeros((4, 3)))


def test_bootstrap_and_spearman():
    rng = np.random.default_rng(2)
    values = rng.normal(10.0, 1.0, size=50)
    lo, hi = bootstrap_ci(values, seed=3)
    assert lo < values.mean() < hi
    assert lo == pytest.approx(bootstrap_ci(values, seed=3)[0])  # reproducible
    assert spearman_rho([1, 2, 3, 4], [10, 20, 30, 40]) == pytest.approx(1.0)
    assert spearman_rho([1, 2, 3, 4], [5, 4, 3, 2]) == pytest.approx(-1.0)


# --- simulated control -----------------------------------------------------

def test_simulate_control_rejects_matched_speakers(ctx, bundles):
    pair = transplant_pairs(ctx.corpus, 0)[0]
    trial = ControlTrial(pair.sentence_id, pair.driving_actor, pair.driving_actor, ())
    with pytest.raises(ProtocolError):
        simulate_control(bundles["micvae"], ctx, trial)


def test_simulate_control_deterministic(ctx, bundles):
    pair = transplant_pairs(ctx.corpus, 0)[0]
    t = ctx.sentence(pair.sentence_id).length
    slots = random_slots(t, 3, np.random.default_rng(0))
    trial = ControlTrial(pair.sentence_id, pair.driving_actor, pair.target_speaker, slots)
    a = simulate_control(bundles["micvae"], ctx, trial)
    b = simulate_control(bundles["micvae"], ctx, trial)
    np.testing.assert_array_equal(a, b)
    assert a.shape == (t, 3)


def test_nocontrol_with_driving_values_rejected(ctx, bundles):
    pair = transplant_pairs(ctx.corpus, 0)[0]
    trial = ControlTrial(pair.sentence_id, pair.driving_actor, pair.target_speaker,
                         ((0, 0),))
    with pytest.raises(ProtocolError):
        simulate_control(bundles["nocontrol"], ctx, trial)
    # K=0 is fine
    out = simulate_control(bundles["nocontrol"], ctx,
                           ControlTrial(pair.sentence_id, pair.driving_actor,
                                        pair.target_speaker, ()))
    assert out.shape[1] == 3


def test_masked_family_simulates(ctx, bundles):
    pair = transplant_pairs(ctx.corpus, 0)[0]
    t = ctx.sentence(pair.sentence_id).length
    slots = random_slots(t, 2, np.random.default_rng(1))
    out = simulate_control(bundles["masked"], ctx,
                           ControlTrial(pair.sentence_id, pair.driving_actor,
                                        pair.target_speaker, slots))
    assert out.shape == (t, 3)


def test_crude_control_identities(ctx, bundles):
    pair = transplant_pairs(ctx.corpus, 0)[0]
    sent = ctx.sentence(pair.sentence_id)
    t = sent.length
    driving = ctx.normalized_paf(pair.sentence_id, pair.driving_actor)

    empty = ControlTrial(pair.sentence_id, pair.driving_actor, pair.target_speaker, ())
    base = crude_control(bundles["nocontrol"], ctx, empty)
    np.testing.assert_array_equal(
        base, simulate_control(bundles["nocontrol"], ctx, empty))

    all_slots = tuple((pos, s) for pos in range(t) for s in range(3))
    full = crude_control(bundles["nocontrol"], ctx,
                         ControlTrial(pair.sentence_id, pair.driving_actor,
                                      pair.target_speaker, all_slots))
    np.testing.assert_array_equal(full, driving)  # full overwrite, exactly

    some = all_slots[:4]
    part = crude_control(bundles["nocontrol"], ctx,
                         ControlTrial(pair.sentence_id, pair.driving_actor,
                                      pair.target_speaker, some))
    for pos, s in some:
        assert part[pos, s] == driving[pos, s]
    untouched = [(pos, s) for pos, s in all_slots if (pos, s) not in some]
    for pos, s in untouched:
        assert part[pos, s] == base[pos, s]


def test_random_slots_bounds():
    rng = np.random.default_rng(3)
    slots = random_slots(5, 15, rng)
    assert len(set(slots)) == 15
    with pytest.raises(ValueError):
        random_slots(5, 16, rng)


def test_untrained_checkpoint_rejected(corpus, bundles, ctx):
    from control_studio.training import TrainSchedule, train
    untrained = train(corpus, tiny_config("nocontrol"), TrainSchedule(epochs=0, seed=9))
    pair = transplant_pairs(corpus, 0)[0]
    trial = ControlTrial(pair.sentence_id, pair.driving_actor, pair.target_speaker, ())
    with pytest.raises(ProtocolError):
        simulate_control(untrained, ctx, trial)
    with pytest.raises(ProtocolError):
        crude_control(untrained, ctx, trial)


def test_eval_context_refuses_empty_test_split(corpus, bundles):
    from control_studio.corpus import Corpus, CorpusSplit
    empty = Corpus(corpus.sentences, corpus.renditions,
                   CorpusSplit(corpus.split.train, corpus.split.val, (), 0))
    with pytest.raises(ProtocolError):
        EvalContext(empty, bundles["micvae"].stats)


# --- refinement ------------------------------------------------------------

def test_refinement_trace_structure(ctx, bundles):
    pair = transplant_pairs(ctx.corpus, 1)[0]
    trace = iterative_refinement(bundles["micvae"], ctx, pair, 6, "micvae")
    counts = [s.driven_count for s in trace.steps]
    assert counts == list(range(len(trace.steps)))
    chosen = [s.chosen for s in trace.steps[1:]]
    assert len(set(chosen)) == len(chosen)  # no slot driven twice
    assert trace.steps[0].chosen is None


def test_refinement_argmax_selection():
    from control_studio.evalsim.refine import _next_slot
    residual = np.array([[0.1, 0.3, 0.0], [0.0, 0.0, 0.5]])
    assert _next_slot(residual, set()) == (1, 2)
    # tie-break: stream order first, then position
    tie = np.array([[0.5, 0.5, 0.0], [0.5, 0.0, 0.0]])
    assert _next_slot(tie, set()) == (0, 0)
    assert _next_slot(tie, {(0, 0)}) == (1, 0)
    assert _next_slot(tie, {(0, 0), (1, 0)}) == (0, 1)


def test_crude_refinement_nonincreasing(ctx, bundles):
    pair = transplant_pairs(ctx.corpus, 2)[0]
    t = ctx.sentence(pair.sentence_id).length
    trace = iterative_refinement(bundles["nocontrol"], ctx, pair, 3 * t, "crude", crude=True)
    curve = trace.curve()
    assert (np.diff(curve) <= 1e-12).all()
    assert curve[-1] == pytest.approx(0.0, abs=1e-12)  # full overwrite ends at zero


def test_refinement_caps_at_3t(ctx, bundles):
    pair = transplant_pairs(ctx.corpus, 3)[0]
    t = ctx.sentence(pair.sentence_id).length
    trace = iterative_refinement(bundles["micvae"], ctx, pair, 999, "m")
    assert len(trace.steps) == 3 * t + 1


# --- sweep -----------------------------------------------------------------

def test_sweep_report_structure(ctx, bundles):
    report = robustness_sweep({"micvae": bundles["micvae"], "crude": bundles["nocontrol"]},
                              ctx, k_grid=(0, 2, 256), trials_per_k=5, seed=4,
                              crude_labels=("crude",))
    assert set(report.models) == {"micvae", "crude"}
    for label in report.models:
        for k in (0, 2, 256):
            e = report.models[label][k]
            assert e.ci_low <= e.mean <= e.ci_high
            assert e.n_trials == 5
    assert report.models["micvae"][256].clamped_trials == 5  # 256 > 3T always here
    assert report.models["micvae"][0].clamped_trials == 0


def test_sweep_same_model_twice_statistically_identical(ctx, bundles):
    report = robustness_sweep({"a": bundles["micvae"], "b": bundles["micvae"]},
                              ctx, k_grid=(0, 4), trials_per_k=6, seed=5)
    for k in (0, 4):
        assert report.models["a"][k].mean == pytest.approx(report.models["b"][k].mean)


def test_sweep_reproducible(ctx, bundles):
    r1 = robustness_sweep({"m": bundles["micvae"]}, ctx, k_grid=(0, 4), trials_per_k=4, seed=6)
    r2 = robustness_sweep({"m": bundles["micvae"]}, ctx, k_grid=(0, 4), trials_per_k=4, seed=6)
    assert r1.models["m"][4].rmses == r2.models["m"][4].rmses


# --- reports and stimuli ---------------------------------------------------

def test_plot_table_format(ctx, bundles, tmp_path):
    report = robustness_sweep({"m": bundles["micvae"]}, ctx, k_grid=(0, 4),
                              trials_per_k=4, seed=7)
    rows = sweep_rows(report)
    assert len(rows) == 1 * 2  # models x grid
    path = tmp_path / "sweep.tsv"
    write_plot_table(rows, path)
    lines = path.read_text().splitlines()
    assert lines[0].split("\t") == list(PLOT_COLUMNS)
    assert len(lines) == 1 + len(rows)

    back = sweep_report_from_json(sweep_report_to_json(report))
    assert back.models["m"][4].mean == report.models["m"][4].mean


def test_refinement_rows_and_json(ctx, bundles, tmp_path):
    pairs = transplant_pairs(ctx.corpus, 2)[:2]
    traces = [iterative_refinement(bundles["micvae"], ctx, p, 3, "m") for p in pairs]
    rows = refinement_rows(traces)
    overall = [r for r in rows if r["metric"] == "rmse_mean"]
    assert len(overall) == 4  # steps 0..3 common grid
    back = traces_from_json(traces_to_json(traces))
    assert back[0].steps[1].chosen == traces[0].steps[1].chosen


def test_contour_table(ctx, bundles, tmp_path):
    pair = transplant_pairs(ctx.corpus, 0)[0]
    t = ctx.sentence(pair.sentence_id).length
    truth = ctx.normalized_paf(pair.sentence_id, pair.driving_actor)
    pred = simulate_control(bundles["micvae"], ctx,
                            ControlTrial(pair.sentence_id, pair.driving_actor,
                                         pair.target_speaker, ((0, 0),)))
    rows = contour_rows("micvae", truth, pred, [(0, 0)])
    assert len(rows) == 3 * t
    driven = [r for r in rows if r["driven"]]
    assert len(driven) == 1 and driven[0]["position"] == 0 and driven[0]["stream"] == "f0"
    write_contour_table(rows, tmp_path / "contour.tsv")
    header = (tmp_path / "contour.tsv").read_text().splitlines()[0]
    assert header.split("\t") == ["model", "position", "stream", "truth", "prediction", "driven"]


def test_export_stimuli_manifest(ctx, bundles, tmp_path):
    pairs = transplant_pairs(ctx.corpus, 3)[:3]
    rows = export_stimuli(bundles["micvae"], ctx, pairs, tmp_path / "stim", seed=8)
    assert len(rows) == 3
    manifest = (tmp_path / "stim" / "manifest.jsonl").read_text().splitlines()
    assert len(manifest) == 3
    for line, row in zip(manifest, rows):
        rec = json.loads(line)
        assert set(rec) == {"pair_id", "path_a", "path_b", "path_ref",
                            "sentence_id", "driving_actor", "target_speaker"}
        a = (tmp_path / "stim" / rec["path_a"]).read_bytes()
        b = (tmp_path / "stim" / rec["path_b"]).read_bytes()
        assert a != b  # conditions differ
        assert (tmp_path / "stim" / rec["path_ref"]).exists()


def test_figures_render(ctx, bundles, tmp_path):
    from control_studio.evalsim.figures import render_contours, render_refinement, render_sweep
    pairs = transplant_pairs(ctx.corpus, 4)[:2]
    traces = [iterative_refinement(bundles["micvae"], ctx, p, 3, "m") for p in pairs]
    render_refinement(traces, tmp_path / "refine.png")
    report = robustness_sweep({"m": bundles["micvae"]}, ctx, k_grid=(0, 4),
                              trials_per_k=3, seed=9)
    render_sweep(report, tmp_path / "sweep.png")
    truth = ctx.normalized_paf(pairs[0].sentence_id, pairs[0].driving_actor)
    pred = simulate_control(bundles["micvae"], ctx,
                            ControlTrial(pairs[0].sentence_id, pairs[0].driving_actor,
                                         pairs[0].target_speaker, ()))
    render_contours(truth, {"m": pred}, [(0, 0), (1, 2)], tmp_path / "contour.png")
    for name in ("refine.png", "sweep.png", "contour.png"):
        assert (tmp_path / name).stat().st_size > 1000
