import numpy as np
import pytest

from decentopt.trace import FIELDS, TraceRecord, TraceSink, emit_csv, format_csv, parse_csv, read_csv


def _random_record(rng):
    def maybe(v):
        return None if rng.random() < 0.2 else v

    return TraceRecord(
        run_id=int(rng.integers(0, 1000)),
        algorithm=str(rng.choice(["dgd", "gt", "prox_pda", "magenta"])),
        stage=int(rng.integers(-1, 50)),
        iteration=int(rng.integers(-2, 10**6)),
        alpha=maybe(float(rng.random() * 10.0 ** rng.integers(-12, 3))),
        radius=maybe(float(rng.random() * 100)),
        y_norm_sq=maybe(float(rng.standard_normal() ** 2 * 1e20)),
        mean_grad_norm_sq=float(rng.random() * 1e-300),
        x_consensus_sq=float(rng.random()),
        y_consensus_sq=maybe(float(rng.random() / 3)),
        v_over_alpha_sq=maybe(float(np.nextafter(rng.random(), 2))),
        potential=maybe(float(-rng.random() * 1e5)),
        boundary_touch_count=int(rng.integers(0, 5)),
        wall_us=int(rng.integers(0, 10**9)),
    )


def test_round_trip_random_records():
    rng = np.random.default_rng(0)
    recs = [_random_record(rng) for _ in range(100)]
    assert parse_csv(format_csv(recs)) == recs


def test_empty_list_writes_header_only(tmp_path):
    path = tmp_path / "t.csv"
    emit_csv([], path)
    assert path.read_text() == ",".join(FIELDS) + "\n"
    assert read_csv(path) == []


def test_one_record_two_lines(tmp_path):
    path = tmp_path / "t.csv"
    emit_csv([_random_record(np.random.default_rng(1))], path)
    text = path.read_text()
    assert text.endswith("\n")
    assert len(text.splitlines()) == 2


def test_field_order_and_formatting():
    rec = TraceRecord(3, "gt", -1, 7, 0.1, None, None, 1 / 3, 2.0, None, None, None, 0, 12)
    line = format_csv([rec]).splitlines()[1]
    assert line == "3,gt,-1,7,0.10000000000000001,,,0.33333333333333331,2,,,,0,12"
    assert FIELDS[:4] == ("run_id", "algorithm", "stage", "iteration")
    assert FIELDS[-2:] == ("boundary_touch_count", "wall_us")


def test_nonfinite_values_survive():
    rec = TraceRecord(0, "dgd", -1, 0, 0.01, None, None, float("inf"), float("nan"), None, None, None, 0, 0)
    back = parse_csv(format_csv([rec]))[0]
    assert back.mean_grad_norm_sq == float("inf")
    assert np.isnan(back.x_consensus_sq)


def test_bad_header_rejected():
    with pytest.raises(ValueError):
        parse_csv("a,b\n")


def test_unwritable_path_reports_it(tmp_path):
    target = tmp_path / "missing" / "t.csv"
    with pytest.raises(OSError, match="missing"):
        emit_csv([], target)


def test_sink_stride_and_force():
    sink = TraceSink(3)
    for r in range(10):
        sink.append(TraceRecord(0, "dgd", -1, r, None, None, None, 0.0, 0.0, None, None, None, 0, 0))
    sink.append(TraceRecord(0, "dgd", -1, 10, None, None, None, 0.0, 0.0, None, None, None, 0, 0), force=True)
    assert [r.iteration for r in sink.records] == [0, 3, 6, 9, 10]
    with pytest.raises(ValueError):
        TraceSink(0)
