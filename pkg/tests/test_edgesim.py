import pytest

from edgeslm import costmodel, datapipe, edgesim, learner, registry
from edgeslm.edgesim import (
    AnalyticalSource,
    MeasuredSource,
    SimConfig,
    lindley_waits,
    run,
    run_realtime,
    service_time,
    stability,
)

REG = registry.builtin_registry()


def analytical(model_name, hw_name, unit, **kw):
    return SimConfig(latency_source=AnalyticalSource(
        model=REG.model(model_name), hardware=REG.hw(hw_name), unit=unit), **kw)


def test_service_time_tinyt5_jetson_gpu():
    config = analytical("TinyT5", "jetson-nano", "gpu")
    assert service_time(config) * 1000 == pytest.approx(10.74, abs=0.005)


def test_service_time_share_doubles():
    base = analytical("TinyT5", "jetson-nano", "gpu")
    shared = analytical("TinyT5", "jetson-nano", "gpu", primary_task_share=0.5)
    assert service_time(shared) == pytest.approx(2 * service_time(base))


def test_service_time_measured_positive():
    state = learner.ClassifierState.zeros(learner.HashedFeaturizer(dimension=2**8))
    config = SimConfig(latency_source=MeasuredSource(state=state), duration=1.0)
    s = service_time(config)
    assert 0 < s < 1.0


def test_run_half_load_hand_example():
    config = analytical("TinyT5", "jetson-nano", "gpu", arrival_interval=1.0, duration=60.0)
    report, trajectory = run(config, service=0.5)
    assert report.arrivals == 60
    assert report.completed == 60
    assert report.dropped == 0
    assert report.max_backlog == 1
    assert report.utilization == pytest.approx(0.5)
    assert report.mean_sojourn == pytest.approx(0.5)
    assert trajectory[0] == (0.0, 1)


def test_run_llama_on_pi_saturates():
    config = analytical("Llama-3.2-1B", "raspberry-pi-3", "cpu",
                        arrival_interval=1.0, duration=3600.0)
    s = service_time(config)
    assert s == pytest.approx(458.13, abs=0.005)
    report, _ = run(config)
    assert report.arrivals == 3600
    assert report.completed == 7
    assert report.final_backlog == 3593
    assert report.dropped == 0
    # backlog growth ~ linear with slope 1 - 1/rho per second
    expected_backlog_rate = 1 - 1 / (s / 1.0)
    assert report.final_backlog / 3600 == pytest.approx(expected_backlog_rate, abs=0.01)


def test_run_zero_duration():
    config = analytical("TinyT5", "jetson-nano", "gpu", duration=0.0)
    report, trajectory = run(config)
    assert report == edgesim.SimReport(arrivals=0, completed=0, dropped=0, final_backlog=0,
                                       max_backlog=0, mean_sojourn=0.0, utilization=0.0,
                                       service_time_used=report.service_time_used)
    assert trajectory == []


def test_run_capacity_drops_counted():
    config = analytical("Llama-3.2-1B", "raspberry-pi-3", "cpu",
                        arrival_interval=1.0, duration=100.0, queue_capacity=5)
    report, _ = run(config)
    assert report.dropped > 0
    assert report.completed + report.dropped + report.final_backlog == report.arrivals
    assert report.max_backlog <= 5


def test_conservation_across_loads():
    for service in (0.1, 0.9, 1.0, 1.7, 30.0):
        config = analytical("TinyT5", "jetson-nano", "gpu", arrival_interval=1.0, duration=200.0)
        report, _ = run(config, service=service)
        assert report.completed + report.dropped + report.final_backlog == report.arrivals


def test_backlog_bounds():
    # stable: max backlog bounded by ceil(rho) + 1
    config = analytical("TinyT5", "jetson-nano", "gpu", arrival_interval=1.0, duration=500.0)
    report, _ = run(config, service=0.8)
    assert report.max_backlog <= 2
    # saturated: final backlog >= (1 - 1/rho) * arrivals - 2
    report, _ = run(config, service=2.5)
    rho = 2.5
    assert report.final_backlog >= (1 - 1 / rho) * report.arrivals - 2


def test_run_bit_reproducible():
    config = analytical("distilGPT2", "raspberry-pi-3", "cpu", duration=600.0)
    assert run(config) == run(config)


def test_utilization_tracks_rho():
    config = analytical("TinyT5", "jetson-nano", "gpu", arrival_interval=1.0, duration=1000.0)
    for service in (0.2, 0.5, 0.95):
        report, _ = run(config, service=service)
        assert report.utilization == pytest.approx(min(1.0, service), abs=1 / report.arrivals)
    report, _ = run(config, service=3.0)
    assert report.utilization == pytest.approx(1.0, abs=1 / report.arrivals)


def test_lindley_recurrence():
    waits = lindley_waits(service=1.5, interval=1.0, n=4)
    assert waits == [0.0, 0.5, 1.0, 1.5]
    assert lindley_waits(0.5, 1.0, 3) == [0.0, 0.0, 0.0]


def test_stability_verdicts():
    tiny = analytical("TinyBERT", "jetson-nano", "gpu")
    v = stability(tiny)
    assert v.stable
    assert v.rho == pytest.approx(0.0276, abs=1e-4)

    gpt_pi = analytical("distilGPT2", "raspberry-pi-3", "cpu")
    v = stability(gpt_pi)
    assert not v.stable
    assert v.rho == pytest.approx(24.16, abs=0.005)

    boundary = stability(tiny, service=1.0)
    assert boundary.stable
    assert boundary.rho == 1.0


def test_export_trajectory_csv():
    config = analytical("TinyT5", "jetson-nano", "gpu", duration=5.0)
    _, trajectory = run(config, service=0.5)
    text = edgesim.export_trajectory_csv(trajectory)
    assert text.splitlines()[0] == "time,backlog"
    assert len(text.splitlines()) == len(trajectory) + 1


def test_config_validation():
    src = AnalyticalSource(model=REG.model("TinyT5"), hardware=REG.hw("jetson-nano"), unit="gpu")
    with pytest.raises(ValueError):
        SimConfig(latency_source=src, arrival_interval=0)
    with pytest.raises(ValueError):
        SimConfig(latency_source=src, primary_task_share=1.0)


def test_unknown_unit_rejected():
    config = analytical("TinyT5", "raspberry-pi-3", "gpu")
    with pytest.raises(ValueError, match="no unit"):
        service_time(config)


def fast_measured_config(duration=3.0, capacity=None):
    records, _ = datapipe.synth_generate(50, 4, 2, 0.5, seed=0)
    feat = learner.HashedFeaturizer(dimension=2**8)
    state = learner.ClassifierState.zeros(feat)
    texts = tuple(r.text for r in records[:8])
    return SimConfig(latency_source=MeasuredSource(state=state, sample_texts=texts),
                     arrival_interval=0.2, duration=duration, queue_capacity=capacity)


def test_realtime_run_completes_roughly_all():
    config = fast_measured_config(duration=2.0)
    report = run_realtime(config)
    expected = 10  # 2.0 s at one packet per 0.2 s
    assert abs(report.arrivals - expected) <= 1
    assert abs(report.completed - report.arrivals) <= 1
    assert report.error is None


def test_realtime_conservation():
    report = run_realtime(fast_measured_config(duration=1.0))
    assert report.completed + report.dropped + report.final_backlog == report.arrivals
    assert 0.0 <= report.utilization <= 1.0


def test_realtime_zero_duration():
    report = run_realtime(fast_measured_config(duration=0.0))
    assert report.arrivals == 0
    assert report.completed == 0


def test_realtime_requires_measured_source():
    config = analytical("TinyT5", "jetson-nano", "gpu")
    with pytest.raises(ValueError, match="measured"):
        run_realtime(config)


def test_realtime_classifier_failure_annotated():
    records, _ = datapipe.synth_generate(10, 3, 2, 0.5, seed=0)
    feat = learner.HashedFeaturizer(dimension=2**8)
    state = learner.ClassifierState.zeros(feat)
    state.weights = None  # force predict to blow up mid-run
    config = SimConfig(latency_source=MeasuredSource(state=state,
                                                     sample_texts=("a=1 b=2",)),
                       arrival_interval=0.1, duration=0.5)
    report = run_realtime(config)
    assert report.error is not None
    assert "classifier failure" in report.error
