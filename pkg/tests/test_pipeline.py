import numpy as np
import pytest

from gffx.field import centering_mn, sample_field
from gffx.pipeline import lattice_pass, map_chunks, pass_seeds, resolve_workers
from gffx.rng import replicate_seeds, substream


def _square(xs):
    return [x * x for x in xs]


@pytest.mark.parametrize("workers,chunk", [(1, 3), (2, 3), (3, 1), (2, 100)])
def test_map_chunks_preserves_order(workers, chunk):
    assert map_chunks(_square, list(range(20)), workers, chunk) == [i * i for i in range(20)]


def test_resolve_workers(monkeypatch):
    monkeypatch.setenv("GFFX_WORKERS", "3")
    assert resolve_workers() == 3
    assert resolve_workers(0) == 1
    monkeypatch.delenv("GFFX_WORKERS")
    assert resolve_workers() == 1


def test_pass_seeds_lineage():
    assert pass_seeds(32, 5, 7) == replicate_seeds(substream(7, 32), 5)
    assert pass_seeds(32, 5, 7) != pass_seeds(64, 5, 7)


def test_worker_count_does_not_change_results(monkeypatch):
    monkeypatch.delenv("GFFX_CACHE_DIR", raising=False)
    a = lattice_pass(16, 40, seed=3, r=2, lam=4.0, level_s=(0.5,), workers=1)
    b = lattice_pass(16, 40, seed=3, r=2, lam=4.0, level_s=(0.5,), workers=2)
    assert np.array_equal(a.maxes.max_centered, b.maxes.max_centered)
    assert np.array_equal(a.maxes.position, b.maxes.position)
    assert np.array_equal(a.counts[0.5], b.counts[0.5])
    for x, y in zip(a.etas, b.etas):
        assert np.array_equal(x.h, y.h) and np.array_equal(x.x, y.x)
        assert x.meta == y.meta


def test_pass_records_match_direct_sampling(monkeypatch):
    monkeypatch.delenv("GFFX_CACHE_DIR", raising=False)
    lp = lattice_pass(16, 5, seed=1, keep_eta=False)
    assert lp.etas is None and lp.r == 4 and lp.replicates == 5
    for s, m in zip(lp.seeds, lp.maxes.max_centered):
        v = sample_field(16, s).values
        assert m == v.max() - centering_mn(16)


def test_disk_cache_round_trip(tmp_path, monkeypatch):
    monkeypatch.setenv("GFFX_CACHE_DIR", str(tmp_path))
    a = lattice_pass(8, 10, seed=2)
    assert len(list(tmp_path.glob("pass-*.pkl"))) == 1
    b = lattice_pass(8, 10, seed=2)
    assert np.array_equal(a.maxes.max_centered, b.maxes.max_centered)
