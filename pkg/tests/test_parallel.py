from illusion_forge.parallel import THREADS_ENV, parallel_map, worker_count


def test_worker_count_env_override(monkeypatch):
    monkeypatch.setenv(THREADS_ENV, "3")
    assert worker_count() == 3
    monkeypatch.setenv(THREADS_ENV, "0")
    assert worker_count() == 1
    monkeypatch.setenv(THREADS_ENV, "junk")
    assert worker_count() >= 1


def test_parallel_map_preserves_order(monkeypatch):
    items = list(range(50))
    for threads in ("1", "8"):
        monkeypatch.setenv(THREADS_ENV, threads)
        assert parallel_map(lambda x: x * x, items) == [x * x for x in items]
