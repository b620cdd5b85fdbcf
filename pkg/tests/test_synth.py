import numpy as np
import pytest

from seqpath.clustering import ClusterAssignment
from seqpath.core import Alphabet
from seqpath.errors import ValidationError
from seqpath.synth import (
    GeneratorSpec,
    generate_mixture,
    generate_outcomes,
    generate_sequences,
    treatment_mixture_specs,
    treatment_pathway_spec,
)


def _spec(**overrides):
    base = dict(
        alphabet=Alphabet(states=("A", "B")),
        initial=np.array([0.5, 0.5]),
        transition=np.array([[0.9, 0.1], [0.2, 0.8]]),
        n_subjects=20,
        n_positions=10,
        seed=1,
    )
    base.update(overrides)
    return GeneratorSpec(**base)


class TestGeneratorSpec:
    def test_rejects_non_stochastic_rows(self):
        with pytest.raises(ValidationError, match="row 0 sums"):
            _spec(transition=np.array([[0.9, 0.2], [0.2, 0.8]]))

    def test_rejects_negative_probabilities(self):
        with pytest.raises(ValidationError, match="non-negative"):
            _spec(initial=np.array([1.5, -0.5]))

    def test_rejects_bad_initial_length(self):
        with pytest.raises(ValidationError, match="length 2"):
            _spec(initial=np.array([1.0]))

    def test_preset_is_row_stochastic(self):
        spec = treatment_pathway_spec(n_subjects=5, n_positions=4, seed=0)
        assert np.allclose(spec.transition.sum(axis=1), 1.0, atol=1e-12)
        assert spec.alphabet.states == ("0/3", "1/3", "2/3", "3/3")


class TestGenerateSequences:
    def test_identity_transition_gives_constant_sequences(self):
        spec = _spec(transition=np.eye(2))
        seq_set = generate_sequences(spec)
        for seq in seq_set:
            assert len(set(seq.states)) == 1

    def test_same_seed_is_byte_identical(self):
        first = generate_sequences(_spec(seed=42))
        second = generate_sequences(_spec(seed=42))
        assert [s.states for s in first] == [s.states for s in second]
        assert first.subject_ids == second.subject_ids

    def test_different_seeds_differ(self):
        first = generate_sequences(_spec(seed=1))
        second = generate_sequences(_spec(seed=2))
        assert [s.states for s in first] != [s.states for s in second]

    def test_subject_ids_zero_padded_in_order(self):
        seq_set = generate_sequences(_spec(n_subjects=12))
        assert seq_set.subject_ids[0] == "p01"
        assert seq_set.subject_ids[11] == "p12"

    def test_offset_reproduces_tail_of_larger_run(self):
        # streams are keyed by global subject index, so generating
        # subjects 5..9 directly must equal the tail of a 10-subject run
        whole = generate_sequences(_spec(n_subjects=10, seed=9))
        tail = generate_sequences(_spec(n_subjects=5, seed=9, subject_offset=5))
        assert [s.states for s in whole][5:] == [s.states for s in tail]
        assert whole.subject_ids[5:] == tail.subject_ids

    def test_empirical_transitions_approach_spec(self):
        spec = treatment_pathway_spec(n_subjects=1200, n_positions=40, seed=3)
        seq_set = generate_sequences(spec)
        from seqpath.descriptives import transition_matrix

        tm = transition_matrix(seq_set)
        assert np.allclose(tm.probs, spec.transition, atol=0.03)

    def test_initial_distribution_respected(self):
        spec = _spec(initial=np.array([1.0, 0.0]), n_subjects=200)
        seq_set = generate_sequences(spec)
        assert all(seq.states[0] == 0 for seq in seq_set)


class TestGenerateMixture:
    def test_structure_and_labels(self):
        specs = treatment_mixture_specs(100, n_positions=12, seed=5)
        seq_set, labels = generate_mixture(specs)
        assert seq_set.n == 100
        assert labels.shape == (100,)
        assert set(labels.tolist()) == {1, 2, 3}
        assert len(set(seq_set.subject_ids)) == 100

    def test_shares_control_sizes(self):
        specs = treatment_mixture_specs(200, n_positions=8, seed=6, shares=(0.5, 0.3, 0.2))
        _seq_set, labels = generate_mixture(specs)
        counts = np.bincount(labels)[1:]
        assert counts.tolist() == [100, 60, 40]

    def test_groups_have_distinct_profiles(self):
        specs = treatment_mixture_specs(300, n_positions=30, seed=7)
        seq_set, labels = generate_mixture(specs)
        codes = seq_set.codes
        untreated_share = [
            (codes[labels == g] == 0).mean() for g in (1, 2, 3)
        ]
        assert untreated_share[0] > untreated_share[1] > untreated_share[2]

    def test_bad_shares_rejected(self):
        with pytest.raises(ValidationError, match="summing to 1"):
            treatment_mixture_specs(100, shares=(0.5, 0.5, 0.5))


class TestGenerateOutcomes:
    def _assignment(self, labels):
        labels = np.asarray(labels)
        k = int(labels.max())
        return ClusterAssignment(
            k=k, labels=labels, sizes=np.bincount(labels, minlength=k + 1)[1:]
        )

    def test_equal_hazards_give_similar_event_rates(self):
        rng = np.random.default_rng(0)
        labels = rng.integers(1, 4, 3000)
        ids = [f"p{i}" for i in range(3000)]
        outcomes = generate_outcomes(
            self._assignment(labels), ids, (1.0, 1.0, 1.0),
            baseline_rate=0.02, censor_time=52.0, seed=11,
        )
        rates = []
        for g in (1, 2, 3):
            members = [ids[i] for i in range(3000) if labels[i] == g]
            rates.append(np.mean([outcomes[m][1] for m in members]))
        assert max(rates) - min(rates) < 0.06

    def test_zero_baseline_rate_gives_no_events(self):
        labels = self._assignment([1, 1, 2])
        outcomes = generate_outcomes(
            labels, ["a", "b", "c"], (1.0, 2.0), 0.0, censor_time=10.0, seed=1
        )
        assert all(not event for _time, event in outcomes.values())
        assert all(time == 10.0 for time, _event in outcomes.values())

    def test_times_positive_and_censor_bounded(self):
        labels = self._assignment([1] * 500)
        outcomes = generate_outcomes(labels, [f"p{i}" for i in range(500)], (1.0,), 0.05, 52.0, 2)
        for time, event in outcomes.values():
            assert 0 < time <= 52.0
            if time < 52.0:
                assert event

    def test_deterministic_given_seed(self):
        labels = self._assignment([1, 2, 1, 2])
        ids = ["a", "b", "c", "d"]
        first = generate_outcomes(labels, ids, (1.0, 1.5), 0.1, 20.0, 3)
        second = generate_outcomes(labels, ids, (1.0, 1.5), 0.1, 20.0, 3)
        assert first == second

    def test_cox_recovers_injected_hazard_ratios(self):
        from seqpath.survival import SurvivalRecord, cox_fit
        from seqpath.synth import generate_mixture, treatment_mixture_specs

        specs = treatment_mixture_specs(6000, n_positions=52, seed=21, shares=(0.4, 0.3, 0.3))
        seq_set, groups = generate_mixture(specs)
        assignment = self._assignment(groups)
        outcomes = generate_outcomes(
            assignment, seq_set.subject_ids, (1.0, 1.8, 1.6),
            baseline_rate=0.05, censor_time=52.0, seed=21,
        )
        records = [
            SurvivalRecord(
                sid,
                outcomes[sid][0],
                outcomes[sid][1],
                (1.0 if groups[i] == 2 else 0.0, 1.0 if groups[i] == 3 else 0.0),
            )
            for i, sid in enumerate(seq_set.subject_ids)
        ]
        fit = cox_fit(records, names=("group_2", "group_3"))
        assert abs(float(fit.hazard_ratios[0]) - 1.8) <= 0.25
        assert abs(float(fit.hazard_ratios[1]) - 1.6) <= 0.25

    def test_higher_hazard_gives_more_events(self):
        rng = np.random.default_rng(1)
        labels = rng.integers(1, 3, 4000)
        ids = [f"p{i}" for i in range(4000)]
        outcomes = generate_outcomes(
            self._assignment(labels), ids, (1.0, 3.0), 0.01, 52.0, 4
        )
        rate = [
            np.mean([outcomes[ids[i]][1] for i in range(4000) if labels[i] == g])
            for g in (1, 2)
        ]
        assert rate[1] > rate[0] + 0.1

    def test_validation(self):
        labels = self._assignment([1, 2])
        with pytest.raises(ValidationError, match="one hazard ratio per cluster"):
            generate_outcomes(labels, ["a", "b"], (1.0,), 0.1, 10.0, 0)
        with pytest.raises(ValidationError, match="positive"):
            generate_outcomes(labels, ["a", "b"], (1.0, -1.0), 0.1, 10.0, 0)
        with pytest.raises(ValidationError, match="censor"):
            generate_outcomes(labels, ["a", "b"], (1.0, 1.0), 0.1, 0.0, 0)
