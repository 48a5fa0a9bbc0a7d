"""EIG consensus core and the floating-output recomputation wrapper."""

from corsim.mvc import EigConsensus, MvcController
from corsim.transport import CoPayload

from drivers import BOT, run_eig_t0, run_eig_t1


ALL3 = [{0: x, 1: y, 2: z} for x in (0, 1, BOT) for y in (0, 1, BOT) for z in (0, 1, BOT)]


class TestEigUnanimous:
    def test_unanimous_one_decides_one(self):
        # derived by exhaustive simulation over Byzantine round-2 messages
        for a in ({0: 0, 1: 1, 2: BOT}, {0: 1, 1: 1, 2: 1}, {0: BOT, 1: BOT, 2: BOT}):
            for m in ({0: 0, 1: 0, 2: 0}, {0: 1, 1: BOT, 2: 0}):
                outcome, _ = run_eig_t1(
                    (1, 1, 1), byz_round1=a, byz_round2_by_receiver={0: m, 1: m, 2: m}
                )
                assert set(outcome.values()) == {1}

    def test_unanimous_zero_decides_zero(self):
        for a in ALL3[::7]:
            for m in ALL3[::5]:
                outcome, _ = run_eig_t1(
                    (0, 0, 0), byz_round1=a, byz_round2_by_receiver={0: m, 1: m, 2: m}
                )
                assert set(outcome.values()) == {0}

    def test_degenerate_t0_tie_breaks_to_zero(self):
        outcome = run_eig_t0((1, 0, 1, 0))
        assert set(outcome.values()) == {0}

    def test_degenerate_t0_majority(self):
        outcome = run_eig_t0((1, 1, 1, 0))
        assert set(outcome.values()) == {1}


class TestEigMechanics:
    def test_not_decided_before_final_exchange(self):
        node = EigConsensus(4, 1, 0)
        node.propose(1)
        assert node.result() is None
        node.process({})
        assert node.result() is None
        node.process({})
        assert node.result() is not None

    def test_restart_clears_state(self):
        node = EigConsensus(4, 1, 0)
        node.propose(1)
        node.process({})
        node.restart()
        assert node.result() is None
        assert node.tree == {}

    def test_malformed_payloads_dropped(self):
        node = EigConsensus(4, 1, 0)
        node.propose(1)
        node.process(
            {
                1: CoPayload(level=5, entries=(((), 1),)),  # wrong level
                2: CoPayload(level=0, entries=("garbage",)),  # bad entry shape
                3: CoPayload(level=0, entries=(((0, 0), 1),)),  # bad label
            }
        )
        assert all(len(label) != 1 for label in node.tree)

    def test_equivocating_relays_resolve_identically(self):
        """The Byzantine subtree resolves from relayed values common to all
        correct nodes, so even split round-1 values cannot split decisions."""
        a = {0: 1, 1: 0, 2: 1}
        for m1 in ALL3[::4]:
            for m2 in ALL3[::6]:
                outcome, _ = run_eig_t1(
                    (1, 1, 0),
                    byz_round1=a,
                    byz_round2_by_receiver={0: m1, 1: m2, 2: m1},
                )
                assert len(set(outcome.values())) == 1


def drive_controllers_cycle(controllers, inputs, kappa):
    """Run one full schedule cycle of the wrapper over a faultless 4-node net."""
    n = len(controllers)
    pending = {i: {} for i in range(n)}
    for phase in range(kappa):
        outs = {}
        for i, ctl in controllers.items():
            outs[i] = ctl.pulse(phase, pending[i], lambda i=i: inputs[i])
        pending = {
            i: {j: outs[j][i] for j in controllers if i in outs[j]}
            for i in controllers
        }


class TestMvcController:
    def test_capture_restart_propose_at_phase_zero(self):
        ctl = MvcController(4, 1, 0)
        ctl.current_result = "stale"
        out = ctl.pulse(0, {}, lambda: 1)
        assert ctl.current_result is None  # fresh co had no decision yet
        assert set(out) == {0, 1, 2, 3}

    def test_processing_window_closes_after_t_plus_1(self):
        ctl = MvcController(4, 1, 0)
        ctl.pulse(0, {}, lambda: 1)
        assert ctl.pulse(1, {}, lambda: 1) != {}
        assert ctl.pulse(3, {}, lambda: 1) == {}  # t=1: window is {1, 2}
        assert ctl.pulse(4, {}, lambda: 1) == {}  # phase t+2 and later: silent

    def test_unanimous_inputs_become_next_cycle_result(self):
        controllers = {i: MvcController(4, 0, i) for i in range(4)}
        drive_controllers_cycle(controllers, [1, 1, 1, 1], kappa=5)
        assert all(c.result() is None for c in controllers.values())
        drive_controllers_cycle(controllers, [0, 0, 0, 0], kappa=5)
        assert all(c.result() == 1 for c in controllers.values())  # one-cycle latency
        drive_controllers_cycle(controllers, [0, 0, 0, 0], kappa=5)
        assert all(c.result() == 0 for c in controllers.values())

    def test_corrupted_floating_output_replaced_at_phase_zero(self):
        controllers = {i: MvcController(4, 0, i) for i in range(4)}
        drive_controllers_cycle(controllers, [1, 1, 1, 1], kappa=5)
        controllers[2].current_result = 77
        drive_controllers_cycle(controllers, [1, 1, 1, 1], kappa=5)
        assert controllers[2].result() == 1

    def test_mixed_inputs_agree(self):
        controllers = {i: MvcController(4, 0, i) for i in range(4)}
        drive_controllers_cycle(controllers, [1, 0, 1, 0], kappa=5)
        drive_controllers_cycle(controllers, [0, 0, 0, 0], kappa=5)
        values = {c.result() for c in controllers.values()}
        assert len(values) == 1
        assert values.pop() in (0, 1)
