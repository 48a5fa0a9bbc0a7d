"""Window algebra and the per-pulse recycling sweep."""

from corsim.cores import DelayStubCore, StubOracle
from corsim.recycler import ObjectArray, window


def brute_window(ind, index_num, log_size):
    """Independent oracle: slot x is kept iff it is ind or up to log_size behind."""
    return frozenset((ind - k) % index_num for k in range(log_size + 1))


class TestWindow:
    def test_example_mid_range(self):
        assert window(5, 8, 3) == {2, 3, 4, 5}

    def test_singleton(self):
        assert window(0, 8, 0) == {0}

    def test_wraparound(self):
        assert window(1, 8, 3) == {6, 7, 0, 1}

    def test_matches_brute_force_everywhere(self):
        for index_num in range(2, 17):
            for log_size in range(0, index_num - 1):
                for ind in range(index_num):
                    assert window(ind, index_num, log_size) == brute_window(
                        ind, index_num, log_size
                    )

    def test_unit_slide_swaps_exactly_one_slot(self):
        for index_num in range(2, 17):
            for log_size in range(0, index_num - 1):
                for ind in range(index_num):
                    old = window(ind, index_num, log_size)
                    new = window((ind + 1) % index_num, index_num, log_size)
                    leaving = old - new
                    entering = new - old
                    assert len(leaving) == 1 and len(entering) == 1
                    assert leaving == {(ind - log_size) % index_num}


def make_array(n=4, t=1, node_id=0, index_num=8, log_size=3):
    oracle = StubOracle(seed=0, correct_ids=list(range(n - t)), dmax=0)
    return ObjectArray(
        n, t, node_id, index_num, log_size,
        lambda s: DelayStubCore(oracle, node_id, s),
    )


class TestRecyclerPulse:
    def test_slide_recycles_exactly_the_leaving_slot(self):
        arr = make_array()
        for slot in (2, 3, 4, 5):
            arr.slots[slot].propose(1)
        assert arr.recycler_pulse(5) == []
        arr.slots[6].propose(1)  # the new anchor after the slide
        assert arr.recycler_pulse(6) == [2]

    def test_unchanged_index_recycles_nothing(self):
        arr = make_array()
        for slot in (2, 3, 4, 5):
            arr.slots[slot].propose(1)
        assert arr.recycler_pulse(5) == []
        assert arr.recycler_pulse(5) == []

    def test_out_of_window_garbage_purged(self):
        arr = make_array()
        arr.slots[0].propose(1)  # transient garbage far from the window
        assert arr.recycler_pulse(5) == [0]
        assert arr.slots[0].is_fresh()

    def test_flag_gossip_wiped_but_not_reported(self):
        arr = make_array()
        arr.slots[0].delivered[3] = True
        assert arr.recycler_pulse(5) == []
        assert arr.slots[0].is_fresh()


def test_out_of_range_index_recycles_by_modular_window():
    # window(12, 8, 3) = {1, 2, 3, 4}: slot 0 is out, slot 1 is kept
    arr = make_array()
    arr.slots[0].propose(1)
    assert arr.recycler_pulse(12) == [0]
    arr2 = make_array()
    arr2.slots[1].propose(1)
    assert arr2.recycler_pulse(12) == []
