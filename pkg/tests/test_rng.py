import numpy as np

from tapersum.rng import open_uniform, stream


class TestStreams:
    def test_reproducible(self):
        a = stream(7, 3).random(5)
        b = stream(7, 3).random(5)
        np.testing.assert_array_equal(a, b)

    def test_distinct_ids_differ(self):
        assert not np.array_equal(stream(7, 3).random(5), stream(7, 4).random(5))

    def test_tuple_ids(self):
        np.testing.assert_array_equal(stream(1, (2, 3)).random(3), stream(1, [2, 3]).random(3))
        assert not np.array_equal(stream(1, (2, 3)).random(3), stream(1, (3, 2)).random(3))

    def test_open_uniform_never_hits_endpoints(self):
        u = open_uniform(stream(0, 0), 1_000_000)
        assert u.min() > 0 and u.max() < 1
