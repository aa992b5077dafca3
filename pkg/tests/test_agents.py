import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from welfarenet.agents import (
    RED,
    WHITE,
    Agent,
    BlacklistError,
    BlacklistRegistry,
    ContactBook,
    ContactRecord,
    Population,
    blacklist_add,
    eligible_invitees,
    eligible_invitees_array,
    record_cooperation_result,
)


def agent_with(partner: int, cls: str | None, count: int = 0) -> Agent:
    a = Agent(0, 100.0, 50.0)
    if cls is not None:
        a.contacts[partner] = ContactRecord(cls, count)
    return a


class TestCooperationRule:
    def test_unknown_success_enters_white(self):
        a = record_cooperation_result(agent_with(1, None), 1, True)
        assert a.contacts[1] == ContactRecord(WHITE, 0)

    def test_white_success_promotes(self):
        a = record_cooperation_result(agent_with(1, WHITE), 1, True)
        assert a.contacts[1] == ContactRecord(RED, 1)

    def test_red_success_counts_up(self):
        a = record_cooperation_result(agent_with(1, RED, 4), 1, True)
        assert a.contacts[1] == ContactRecord(RED, 5)

    def test_red_failure_counts_down(self):
        a = record_cooperation_result(agent_with(1, RED, 3), 1, False)
        assert a.contacts[1] == ContactRecord(RED, 2)

    def test_red_one_failure_demotes(self):
        a = record_cooperation_result(agent_with(1, RED, 1), 1, False)
        assert a.contacts[1].classification == WHITE
        assert a.red_list() == [] and a.white_list() == [1]

    @pytest.mark.parametrize("cls", [None, WHITE])
    def test_failure_leaves_others(self, cls):
        a = record_cooperation_result(agent_with(1, cls), 1, False)
        assert a.contacts.get(1) == (None if cls is None else ContactRecord(WHITE, 0))

    def test_self_rejected(self):
        with pytest.raises(ValueError):
            record_cooperation_result(Agent(3, 1.0, 1.0), 3, True)

    def test_spirit_range(self):
        with pytest.raises(ValueError):
            Agent(0, 1.0, 101.0)


class TestContactBook:
    def test_codes(self):
        book = ContactBook.from_adjacency([[1], [0, 2], [1]])
        assert book.classification(0, 1) == WHITE
        assert book.classification(0, 2) is None
        book.record([0, 1, 2], True)
        assert book.classification(0, 1) == RED and book.coop_count(0, 1) == 1
        assert book.classification(0, 2) == WHITE
        book.record([0, 1], False)
        assert book.classification(0, 1) == WHITE
        assert book.classification(1, 2) == RED

    @settings(max_examples=80, deadline=None)
    @given(
        n=st.integers(2, 9),
        ops=st.lists(st.tuples(st.sets(st.integers(0, 8), min_size=2, max_size=6), st.booleans()), max_size=30),
    )
    def test_matches_scalar_reference(self, n, ops):
        book = ContactBook(n, track_tallies=True)
        agents = [Agent(i, 0.0, 0.0) for i in range(n)]
        for members, success in ops:
            ids = sorted(m for m in members if m < n)
            book.record(ids, success)
            for a in ids:
                for b in ids:
                    if a != b:
                        record_cooperation_result(agents[a], b, success)
        for i in range(n):
            assert book.as_records(i) == agents[i].contacts
            red, white = set(book.red(i).tolist()), set(book.white(i).tolist())
            assert not red & white
            for j in red:
                assert book.coop_count(i, j) >= 1

    def test_tallies(self):
        book = ContactBook(3, track_tallies=True)
        book.record([0, 1], True)
        book.record([0, 1], True)
        book.record([0, 1], False)
        assert book.tally_class(0, 1) == RED
        book.record([0, 1], False)
        book.record([0, 1], False)
        assert book.tally_class(0, 1) == WHITE
        assert book.tally_class(0, 2) is None
        with pytest.raises(RuntimeError):
            ContactBook(2).tally_class(0, 1)


class TestBlacklist:
    def test_add_and_expiry(self):
        reg = blacklist_add(BlacklistRegistry(), 5, now=100, k=11, t_len=1)
        assert reg.entries == {5: 111}
        assert reg.contains(5, 110)
        assert not reg.contains(5, 111)

    def test_invalid_k(self):
        with pytest.raises(BlacklistError, match="k must exceed 10"):
            BlacklistRegistry().add(1, 0, 10)

    def test_later_expiry_kept(self):
        reg = BlacklistRegistry()
        reg.add(2, 10, 11)
        reg.add(2, 30, 11)
        assert reg.entries[2] == 41
        reg.add(2, 0, 11)
        assert reg.entries[2] == 41

    def test_purge_at_expiry(self):
        reg = BlacklistRegistry()
        reg.add(1, 0, 11)
        reg.add(2, 5, 11)
        assert reg.purge(10) == []
        assert reg.purge(11) == [1]
        assert 1 not in reg and 2 in reg
        assert reg.mask(4).tolist() == [False, False, True, False]


def make_population(wealth, adjacency):
    wealth = np.asarray(wealth, dtype=float)
    return Population(wealth, np.full(wealth.size, 50.0), ContactBook.from_adjacency(adjacency))


class TestInvitees:
    def test_empty_lists(self):
        pop = make_population([10, 10], [[], []])
        out = eligible_invitees_array(0, pop, np.zeros(2, bool), 0.5, np.random.default_rng(0))
        assert out.size == 0

    def test_half_wealth_filter(self):
        pop = make_population([300, 100, 151], [[1, 2], [0], [0]])
        pop.contacts.record([0, 1], True)
        pop.contacts.record([0, 2], True)
        out = eligible_invitees_array(0, pop, np.zeros(3, bool), 0.5, np.random.default_rng(0))
        assert out.tolist() == [2]

    def test_red_plus_half_of_white(self):
        # sponsor 0, red {1}, white {2, 3, 4, 5}
        pop = make_population([10] * 6, [[1, 2, 3, 4, 5], [0], [0], [0], [0], [0]])
        pop.contacts.state[0, 1] = 2
        picks = set()
        for seed in range(20):
            out = eligible_invitees_array(0, pop, np.zeros(6, bool), 0.5, np.random.default_rng(seed))
            assert out[0] == 1 and out.size == 3
            picks.add(tuple(out[1:].tolist()))
        assert len(picks) > 1
        again = eligible_invitees_array(0, pop, np.zeros(6, bool), 0.5, np.random.default_rng(3))
        first = eligible_invitees_array(0, pop, np.zeros(6, bool), 0.5, np.random.default_rng(3))
        assert again.tolist() == first.tolist()

    def test_round_half_up(self):
        pop = make_population([10] * 4, [[1, 2, 3], [0], [0], [0]])
        out = eligible_invitees_array(0, pop, np.zeros(4, bool), 0.5, np.random.default_rng(1))
        assert out.size == 2

    def test_blacklisted_excluded(self):
        pop = make_population([10] * 4, [[1, 2, 3], [0], [0], [0]])
        blocked = np.array([False, True, False, False])
        out = eligible_invitees_array(0, pop, blocked, 1.0, np.random.default_rng(0))
        assert out.tolist() == [2, 3]

    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(0, 10**6), frac=st.sampled_from([0.0, 0.25, 0.5, 0.8, 1.0]))
    def test_array_matches_scalar(self, seed, frac):
        rng = np.random.default_rng(seed)
        n = 12
        adj = [[j for j in range(n) if j != i and rng.random() < 0.6] for i in range(n)]
        pop = make_population(rng.uniform(0, 100, n), adj)
        for _ in range(5):
            pop.contacts.record(sorted(rng.choice(n, 4, replace=False).tolist()), bool(rng.random() < 0.7))
        reg = BlacklistRegistry()
        for a in rng.choice(n, 3, replace=False).tolist():
            reg.add(a, 0, 11)
        agents = [pop.agent(i) for i in range(n)]
        for sponsor in range(n):
            sseed = int(rng.integers(2**32))
            expect = eligible_invitees(agents[sponsor], agents, reg, frac, np.random.default_rng(sseed))
            got = eligible_invitees_array(sponsor, pop, reg.mask(n), frac, np.random.default_rng(sseed))
            assert got.tolist() == expect
