import numpy as np

from physmorph.utils.seeding import derive_seed, make_rng


def test_derive_seed_is_stable():
    assert derive_seed(0, 1, 2) == derive_seed(0, 1, 2)
    seeds = {
        derive_seed(0),
        derive_seed(1),
        derive_seed(0, 1),
        derive_seed(0, 2),
        derive_seed(0, 1, 0),
    }
    assert len(seeds) == 5
    assert 0 <= derive_seed(123, 4) < 2**32


def test_make_rng_streams():
    a = make_rng(7, 3, 0, 1).normal(size=5)
    b = make_rng(7, 3, 0, 1).normal(size=5)
    c = make_rng(7, 3, 0, 2).normal(size=5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
