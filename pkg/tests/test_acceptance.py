"""End-to-end acceptance checks, one scoreboard test per headline claim.

Every test prints a single PASS/FAIL line (visible under -s, and echoed in
the assertion message on failure) with the measured numbers and wall time,
then asserts the same condition.  Seeds are fixed so the suite is exactly
reproducible.  Runtime limits are part of the acceptance conditions.
"""

import math
import time
from collections import Counter

import numpy as np
import pytest

from adaptive_shadows.attack import attack_experiment, run_adaptive_attack
from adaptive_shadows.core import (
    DenseState,
    HermitianDense,
    MechanismConfig,
    PauliString,
    RankOneProjector,
    expectation,
    spawn_rngs,
)
from adaptive_shadows.errors import Halted
from adaptive_shadows.ifpc import (
    EmpiricalMeanMechanism,
    otp_decrypt,
    otp_encrypt,
    run_local_attack,
    run_pauli_attack,
)
from adaptive_shadows.mechanisms import (
    DpMedianSession,
    PmwSession,
    adaptive_pauli_mechanism,
    bell_probabilities,
    q_p_values,
)
from adaptive_shadows.shadows import (
    collect_povm_snapshots,
    povm_moment_bound,
    povm_tail_bound,
    shadow_norm_bound,
    snapshot_values,
)
from adaptive_shadows.subspace import (
    ExactTeacher,
    make_pmw_tomograph_factory,
    run_bounded_frobenius,
    run_single_rank,
    single_rank_mistake_cap,
)
from adaptive_shadows.threshold_search import (
    ClosenessTeacher,
    ShadowThresholdSession,
    truncation_level,
)

M_GRID = [100, 200, 400, 800, 1600, 3200, 6400, 10000]


def _report(ok: bool, label: str, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} {label}: {detail}"
    print(line)
    assert ok, line


def _random_density(d, rng):
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    m = g @ g.conj().T
    return DenseState(m / np.trace(m).real)


def _heavy_state(d, rng, weights):
    """Density matrix with the given leading eigenvalues in a random basis."""
    w = np.zeros(d)
    w[: len(weights)] = weights
    w[len(weights):] = (1.0 - sum(weights)) / (d - len(weights))
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, _ = np.linalg.qr(g)
    return DenseState((q * w) @ q.conj().T), q


def _random_effect(d, rng, lo=0.1, hi=0.9):
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, _ = np.linalg.qr(g)
    return HermitianDense((q * rng.uniform(lo, hi, size=d)) @ q.conj().T)


# ---------------------------------------------------------------------------
# 1. adaptive attack vs non-adaptive baseline over the budget grid
# ---------------------------------------------------------------------------

def test_adaptive_attack_dominates_baseline_over_budget_grid():
    """N=10000 over eight budgets, 100 runs each, error bars separated."""
    t0 = time.time()
    rows = attack_experiment(10_000, M_GRID, runs=100, seed=20260814)
    a = {r["M"]: r for r in rows if r["mode"] == "adaptive"}
    n = {r["M"]: r for r in rows if r["mode"] == "nonadaptive"}
    elapsed = time.time() - t0

    top = a[10_000]["error_mean"]
    base_worst = max(n[M]["error_mean"] for M in M_GRID)
    seps = []
    for M in (800, 1600, 3200, 6400, 10000):
        gap = a[M]["error_mean"] - n[M]["error_mean"]
        # sigma of the mean difference: the comparison is between means
        sigma = math.hypot(a[M]["error_std"], n[M]["error_std"]) / math.sqrt(100)
        seps.append(gap / sigma if sigma > 0 else math.inf)
    ok = (top >= 0.9 and base_worst <= 0.3
          and all(s >= 1.0 for s in seps) and elapsed <= 600.0)
    _report(ok, "adaptive attack dominates baseline",
            f"adaptive mean at M=10000 is {top:.3f} (need >= 0.9), "
            f"worst baseline mean {base_worst:.3f} (need <= 0.3), "
            f"min mean separation {min(seps):.1f} sigma from M=800 up, "
            f"{elapsed:.0f}s")


# ---------------------------------------------------------------------------
# 2. small-sample attack: forced error at N=200 with M=8000 queries
# ---------------------------------------------------------------------------

def test_small_sample_attack_forces_error_reliably():
    """100 seeded runs at N=200, M=8000: adaptive error >= 0.99 in >= 95."""
    t0 = time.time()
    errs = np.array([run_adaptive_attack(200, 8000, rng).error
                     for rng in spawn_rngs(977, 100)])
    elapsed = time.time() - t0
    hits = int((errs >= 0.99).sum())
    ok = hits >= 95 and elapsed <= 120.0
    _report(ok, "small-sample attack forces error",
            f"{hits}/100 runs reached error >= 0.99 (need >= 95), "
            f"median error {np.median(errs):.3f}, {elapsed:.0f}s")


# ---------------------------------------------------------------------------
# 3 + 4. single-snapshot tails and moments against the analytic bounds
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def snapshot_probe():
    """1e5 snapshots at d=8 of a fixed state, observable with tr(O^2) = 2."""
    rng = np.random.default_rng(31415)
    state = _random_density(8, rng)
    g = rng.normal(size=(8, 2)) + 1j * rng.normal(size=(8, 2))
    q, _ = np.linalg.qr(g)
    obs = HermitianDense(np.outer(q[:, 0], q[:, 0].conj())
                         - np.outer(q[:, 1], q[:, 1].conj()))
    ds = collect_povm_snapshots(state, 100_000, rng)
    vals = snapshot_values(ds, obs)
    truth = expectation(state, obs)
    B = shadow_norm_bound(obs, "povm")
    return vals - truth, B


def test_single_snapshot_tails_respect_bound(snapshot_probe):
    """Empirical tail mass never exceeds the (loose) analytic tail bound."""
    t0 = time.time()
    centered, B = snapshot_probe
    assert abs(B - 6.0) < 1e-9, f"variance proxy {B} != 3 tr(O^2)"
    pairs = []
    for tau in (0.25, 0.5, 1.0):
        emp = float((np.abs(centered) >= tau).mean())
        pairs.append((tau, emp, povm_tail_bound(tau, B)))
    elapsed = time.time() - t0
    ok = all(emp <= bound for _, emp, bound in pairs) and elapsed <= 60.0
    _report(ok, "single-snapshot tail bound",
            ", ".join(f"tau={t}: {e:.3f} <= {b:.3f}" for t, e, b in pairs)
            + f" (bound loose by design), {elapsed:.0f}s")


def test_single_snapshot_moments_respect_bounds(snapshot_probe):
    """Centered 2nd/4th moments sit under 2!(4B) and 4!(4B)^2 with 3-sigma room."""
    t0 = time.time()
    centered, B = snapshot_probe
    n = len(centered)
    lines = []
    ok = True
    for k in (2, 4):
        powered = centered**k
        emp = float(powered.mean())
        se = float(powered.std(ddof=1)) / math.sqrt(n)
        bound = povm_moment_bound(k, B)
        ok = ok and emp + 3.0 * se <= bound
        lines.append(f"m{k}={emp:.2f}+3*{se:.2f} <= {bound:.0f}")
    elapsed = time.time() - t0
    ok = ok and elapsed <= 60.0
    _report(ok, "single-snapshot moment bounds",
            ", ".join(lines) + f", {elapsed:.0f}s")


# ---------------------------------------------------------------------------
# 5. truncation bias of thresholded snapshot estimates
# ---------------------------------------------------------------------------

def test_truncation_bias_stays_within_budget():
    """|E[truncated] - E[raw]| <= eps/3 at d=16 over 1e6 snapshots, 5-sigma slack."""
    t0 = time.time()
    rng = np.random.default_rng(27182)
    state = _random_density(16, rng)
    g = rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16))
    q, _ = np.linalg.qr(g)
    spectrum = rng.uniform(-1.0, 1.0, size=16)
    spectrum *= math.sqrt(4.0 / 3.0) / np.linalg.norm(spectrum)  # tr(O^2) = 4/3
    obs = HermitianDense((q * spectrum) @ q.conj().T)
    assert abs(shadow_norm_bound(obs, "povm") - 4.0) < 1e-9

    total = 1_000_000
    chunk = 250_000
    sums = {eps: 0.0 for eps in (0.2, 0.3)}
    sq_sums = {eps: 0.0 for eps in (0.2, 0.3)}
    levels = {eps: truncation_level(4.0, eps) for eps in (0.2, 0.3)}
    max_abs = 0.0
    for _ in range(total // chunk):
        ds = collect_povm_snapshots(state, chunk, rng)
        vals = snapshot_values(ds, obs)
        max_abs = max(max_abs, float(np.abs(vals).max()))
        for eps, T in levels.items():
            delta = np.clip(vals, -T, T) - vals
            sums[eps] += float(delta.sum())
            sq_sums[eps] += float((delta**2).sum())
    elapsed = time.time() - t0

    lines = []
    ok = True
    for eps, T in levels.items():
        bias = sums[eps] / total
        var = max(sq_sums[eps] / total - bias**2, 0.0)
        se = math.sqrt(var / total)
        ok = ok and abs(bias) <= eps / 3.0 + 5.0 * se
        lines.append(f"eps={eps}: |bias|={abs(bias):.2e} <= {eps / 3.0:.3f}+5se")
    ok = ok and elapsed <= 120.0
    _report(ok, "truncation bias",
            ", ".join(lines) + f"; max |value| {max_abs:.1f} vs smallest level "
            f"{min(levels.values()):.0f}, {elapsed:.0f}s")


# ---------------------------------------------------------------------------
# 6. threshold-search contract under adversarial adaptive streams
# ---------------------------------------------------------------------------

def test_threshold_search_contract_and_budget_halting():
    """100 adversarial streams at d=8: zero contract violations, exact halting."""
    t0 = time.time()
    eps = 0.3
    violations = 0
    asked_total = 0
    for seed in range(100):
        rng = np.random.default_rng(5000 + seed)
        state = _random_density(8, rng)
        ds = collect_povm_snapshots(state, 12_000, rng)
        cfg = MechanismConfig(N=12_000, M=200, epsilon=eps, delta=0.05,
                              B=3.0, ell=10, K=16, seed=seed)
        session = ShadowThresholdSession(ds, cfg, rng=rng)
        last = "Yes"
        for _ in range(200):
            obs = _random_effect(8, rng)
            truth = expectation(state, obs)
            u = rng.random()
            if last == "No" or u < 0.55:
                # pinned just past the must-answer-Yes edge
                theta = min(1.0, truth + eps + 0.02)
            elif u < 0.8:
                # just past the must-answer-No edge
                theta = max(0.0, truth - 0.02)
            else:
                # gray zone: either answer is allowed
                theta = min(1.0, truth + eps * rng.uniform(0.1, 0.9))
            ans = session.ask(obs, theta)
            asked_total += 1
            if ans == "Yes" and truth > theta:
                violations += 1
            if ans == "No" and truth <= theta - eps:
                violations += 1
            last = ans
            if session.halted:
                break

    # exact budget halting: the (ell+1)-th "No" is emitted, the next ask raises
    rng = np.random.default_rng(424242)
    state = _random_density(8, rng)
    ds = collect_povm_snapshots(state, 4_000, rng)
    cfg = MechanismConfig(N=4_000, M=50, epsilon=eps, delta=0.05,
                          B=3.0, ell=10, K=16, seed=7)
    s2 = ShadowThresholdSession(ds, cfg, rng=rng)
    top = np.linalg.eigh(state.matrix)[1][:, -1]
    hot = RankOneProjector(top)
    answers = [s2.ask(hot, 0.05) for _ in range(11)]
    halt_exact = answers == ["No"] * 11 and s2.halted
    try:
        s2.ask(hot, 0.05)
        halt_exact = False
    except Halted:
        pass
    elapsed = time.time() - t0

    ok = violations == 0 and halt_exact and elapsed <= 60.0
    _report(ok, "threshold-search contract",
            f"{violations} violations over {asked_total} adversarial queries "
            f"(100 streams), halting exact at the 11th No: {halt_exact}, "
            f"{elapsed:.0f}s")


# ---------------------------------------------------------------------------
# 7. forced teacher mistakes come back with sharp corrections
# ---------------------------------------------------------------------------

def test_forced_mistakes_yield_sharp_corrections():
    """Deliberately wrong guesses: |correction - truth| <= eps/4 in >= 95/100."""
    t0 = time.time()
    eps = 0.3
    hits = 0
    forced = 0
    errs = []
    for trial in range(100):
        rng = np.random.default_rng(8200 + trial)
        state, q = _heavy_state(8, rng, (0.65,))
        obs = RankOneProjector(q[:, 0])
        truth = expectation(state, obs)
        ds = collect_povm_snapshots(state, 16_384, rng)
        cfg = MechanismConfig(N=16_384, M=6, epsilon=eps, delta=0.05,
                              B=3.0, ell=3, K=128, seed=trial)
        corr_ds = collect_povm_snapshots(state, 16_384, rng)
        corr_cfg = MechanismConfig(N=16_384, M=6, epsilon=1.0, delta=0.05,
                                   B=3.0, ell=3, K=128, seed=trial + 1)
        corr = DpMedianSession(corr_ds, corr_cfg, rng=rng, gamma=0.025)
        teacher = ClosenessTeacher(ds, cfg, rng=rng, correction_session=corr)
        verdict, mu = teacher.check(obs, max(0.0, truth - 2.0 * eps))
        if verdict == "Mistake":
            forced += 1
            errs.append(abs(mu - truth))
            if abs(mu - truth) <= eps / 4.0:
                hits += 1
    elapsed = time.time() - t0
    ok = forced == 100 and hits >= 95 and elapsed <= 60.0
    _report(ok, "teacher corrections are sharp",
            f"{forced}/100 guesses flagged, {hits}/100 corrections within "
            f"eps/4 = {eps / 4.0} (need >= 95), worst {max(errs):.3f}, "
            f"{elapsed:.0f}s")


# ---------------------------------------------------------------------------
# 8. exact-oracle learner: global mistake cap and heavy-direction count
# ---------------------------------------------------------------------------

def test_exact_oracle_learner_respects_mistake_caps():
    """Adversarial rank-one streams at d=64: caps hold in every seed."""
    t0 = time.time()
    eps = 0.2
    cap = single_rank_mistake_cap(eps)
    heavy_cap = int(1.0 / eps)
    worst_mistakes = 0
    worst_heavy = 0
    total_mistakes = 0
    ok = True
    for seed in range(100):
        rng = np.random.default_rng(9400 + seed)
        state, q = _heavy_state(64, rng, (0.3, 0.25, 0.2))
        teacher = ExactTeacher(state, eps)
        cfg = MechanismConfig(N=10, M=200, epsilon=eps, seed=seed)

        history = []
        last_mistakes = [0]
        jumps = [0]

        def stream():
            for k in range(200):
                if teacher.mistakes > last_mistakes[0] or not history:
                    # walk the heavy directions first, then roam the tail
                    if jumps[0] < 3:
                        v = q[:, jumps[0]] + 0.05 * (rng.normal(size=64)
                                                     + 1j * rng.normal(size=64))
                    else:
                        j = int(rng.integers(0, 64))
                        v = q[:, j] + 0.3 * (rng.normal(size=64)
                                             + 1j * rng.normal(size=64))
                    jumps[0] += 1
                elif k % 11 == 0 and len(history) > 2:
                    v = history[int(rng.integers(0, len(history)))]  # replay
                else:
                    v = history[-1] + 0.1 * (rng.normal(size=64)
                                             + 1j * rng.normal(size=64))
                last_mistakes[0] = teacher.mistakes
                v = v / np.linalg.norm(v)
                history.append(v)
                yield RankOneProjector(v)

        run = run_single_rank(state, stream(), cfg, teacher)
        heavy = sum(1 for w in run.ledger.witnesses
                    if w is not None and w > eps)
        total_mistakes += run.ledger.mistake_count
        worst_mistakes = max(worst_mistakes, run.ledger.mistake_count)
        worst_heavy = max(worst_heavy, heavy)
        ok = ok and run.ledger.mistake_count <= cap and heavy <= heavy_cap
    elapsed = time.time() - t0
    ok = ok and total_mistakes >= 100 and elapsed <= 120.0
    _report(ok, "exact-oracle learner caps",
            f"worst mistakes {worst_mistakes} <= {cap}, worst heavy-direction "
            f"count {worst_heavy} <= {heavy_cap}, "
            f"{total_mistakes} mistakes across 100 seeds, {elapsed:.0f}s")


# ---------------------------------------------------------------------------
# 9. full pipeline: learner + shadow teacher + private tomographs
# ---------------------------------------------------------------------------

def test_full_pipeline_tracks_adaptive_effect_streams():
    """d=16, 200 adaptive Frobenius-bounded queries, answers within eps."""
    t0 = time.time()
    eps = 0.3
    weights = np.array([0.95, 0.7, 0.45])
    good = 0
    worst = 0.0
    seeds = 100
    for seed in range(seeds):
        rng = np.random.default_rng(14000 + seed)
        rho, q = _heavy_state(16, rng, (0.3, 0.25, 0.2))

        ds_t = collect_povm_snapshots(rho, 9_984, rng)
        cfg_t = MechanismConfig(N=9_984, M=400, epsilon=0.15, delta=0.05,
                                B=4.0, ell=250, K=192, seed=seed)
        corr_ds = collect_povm_snapshots(rho, 9_984, rng)
        corr_cfg = MechanismConfig(N=9_984, M=400, epsilon=2.0, delta=0.05,
                                   B=4.0, ell=250, K=192, seed=seed + 1)
        corr = DpMedianSession(corr_ds, corr_cfg, rng=rng, gamma=0.05)
        teacher = ClosenessTeacher(ds_t, cfg_t, rng=rng,
                                   correction_session=corr)
        factory = make_pmw_tomograph_factory(
            MechanismConfig(N=4_000, M=5_000, epsilon=4.0, delta=0.05,
                            ell=20_000, seed=seed))
        cfg = MechanismConfig(N=9_984, M=200, epsilon=eps, delta=0.1,
                              B=4.0, ell=250, K=192, seed=seed)

        history = []
        last_mistakes = [0]

        def stream():
            for k in range(200):
                if teacher.mistakes > last_mistakes[0] or not history:
                    cols = rng.choice(16, size=3, replace=False)
                    probes = (math.sqrt(0.91) * q[:, cols]
                              + 0.3 * (rng.normal(size=(16, 3))
                                       + 1j * rng.normal(size=(16, 3))))
                else:
                    probes = history[-1] + 0.1 * (rng.normal(size=(16, 3))
                                                  + 1j * rng.normal(size=(16, 3)))
                last_mistakes[0] = teacher.mistakes
                basis, _ = np.linalg.qr(probes)
                history.append(probes)
                yield HermitianDense((basis * weights) @ basis.conj().T)

        run = run_bounded_frobenius(rho, stream(), cfg, teacher,
                                    tomograph_factory=factory, rng=rng)
        seed_worst = max(abs(r.answer - r.truth) for r in run.transcript.rounds)
        worst = max(worst, seed_worst)
        good += seed_worst <= eps
    elapsed = time.time() - t0
    ok = good >= 90 and elapsed <= 300.0
    _report(ok, "full pipeline on adaptive streams",
            f"{good}/{seeds} seeds kept all 200 answers within eps={eps} "
            f"(need >= 90), worst deviation {worst:.3f}, {elapsed:.0f}s")


# ---------------------------------------------------------------------------
# 10. multiplicative weights over an 8-bit universe under adaptive queries
# ---------------------------------------------------------------------------

def test_pmw_tracks_adaptive_queries_on_byte_universe():
    """500 scripted adaptive queries: every answer within 0.1 of exact truth."""
    t0 = time.time()
    U = 256
    good = 0
    worst = 0.0
    for seed in range(100):
        rng = np.random.default_rng(16000 + seed)
        h = np.exp(-2.0 * rng.exponential(size=U))
        h /= h.sum()
        cfg = MechanismConfig(N=32_768, M=500, epsilon=0.5, delta=0.05,
                              ell=600, seed=seed)
        session = PmwSession(h, 32_768, cfg, rng=rng)
        last = 0.0
        seed_worst = 0.0
        for j in range(500):
            mask = rng.random(U) < 0.5
            v = np.where(mask, 1.0, -1.0)
            if last > 0:
                v[: U // 2] *= -1.0  # steer against the previous answer
            if j % 7 == 0:
                v = np.sign(v) * rng.uniform(0.2, 1.0, size=U)
            ans = session.query(v)
            seed_worst = max(seed_worst, abs(ans - float(h @ v)))
            last = ans
        worst = max(worst, seed_worst)
        good += seed_worst <= 0.1
    elapsed = time.time() - t0
    ok = good >= 95 and elapsed <= 120.0
    _report(ok, "multiplicative weights accuracy",
            f"{good}/100 seeds within 0.1 on all 500 queries (need >= 95), "
            f"worst deviation {worst:.3f}, {elapsed:.0f}s")


# ---------------------------------------------------------------------------
# 11. fingerprinting games force errors; pads are correct and perfectly hiding
# ---------------------------------------------------------------------------

def test_fingerprinting_games_force_large_errors():
    """Both query variants at N=5, M=25N^2; pad round-trip and secrecy exact."""
    t0 = time.time()
    N, M = 5, 625
    forced = {}
    theta_pos = {}
    for label, runner, base in (("local", run_local_attack, 11_000),
                                ("pauli", run_pauli_attack, 12_000)):
        results = [runner(EmpiricalMeanMechanism(), N, M,
                          np.random.default_rng(base + s)) for s in range(100)]
        forced[label] = sum(r.forced_error for r in results)
        theta_pos[label] = sum(r.state.theta > 0 for r in results)

    trips = all(otp_decrypt(sk, otp_encrypt(sk, m)) == m
                for k in range(8) for w in range(8)
                for sk in [format(k, "03b")] for m in [format(w, "03b")])

    m0, m1 = "00000000", "10110001"
    keys = [format(k, "08b") for k in range(256)]
    dist0 = Counter(otp_encrypt(sk, m0) for sk in keys)
    dist1 = Counter(otp_encrypt(sk, m1) for sk in keys)
    hiding = dist0 == dist1 and set(dist0.values()) == {1}

    elapsed = time.time() - t0
    ok = (forced["local"] >= 90 and forced["pauli"] >= 90
          and trips and hiding and elapsed <= 300.0)
    _report(ok, "fingerprinting games",
            f"forced error in {forced['local']}/100 local and "
            f"{forced['pauli']}/100 pauli seeds (need >= 90), cornered rounds "
            f"seen in {theta_pos['local']}/{theta_pos['pauli']} of them, "
            f"pad round-trip exact: {trips}, perfectly hiding: {hiding}, "
            f"{elapsed:.0f}s")


# ---------------------------------------------------------------------------
# 12. Bell-sample mechanism answers adaptive Pauli streams on 3 qubits
# ---------------------------------------------------------------------------

def _mutate_pauli(word: str, rng) -> str:
    site = int(rng.integers(0, len(word)))
    letter = "IXYZ"[int(rng.integers(0, 4))]
    out = word[:site] + letter + word[site + 1:]
    return out if out.strip("I") else word


def test_pauli_stream_answers_match_dense_truths():
    """Two-phase adaptive Pauli streams, all 100 answers within eps=0.15."""
    t0 = time.time()
    eps = 0.15
    good = 0
    worst = 0.0
    for seed in range(100):
        rng = np.random.default_rng(13000 + seed)
        rho = _random_density(8, rng)
        phase1 = []
        while len(phase1) < 60:
            w = "".join("IXYZ"[int(rng.integers(0, 4))] for _ in range(3))
            if w != "III":
                phase1.append(w)
        cfg1 = MechanismConfig(N=100_000, M=60, epsilon=eps, delta=0.05,
                               seed=seed)
        a1 = adaptive_pauli_mechanism(rho, [PauliString(w) for w in phase1],
                                      cfg1, rng=rng)
        ranked = sorted(zip(phase1, a1), key=lambda p: -abs(p[1]))
        phase2 = [w for w, _ in ranked[:10]]  # replay the strongest answers
        while len(phase2) < 40:
            phase2.append(_mutate_pauli(ranked[len(phase2) % 10][0], rng))
        cfg2 = MechanismConfig(N=100_000, M=40, epsilon=eps, delta=0.05,
                               seed=seed + 1)
        a2 = adaptive_pauli_mechanism(rho, [PauliString(w) for w in phase2],
                                      cfg2, rng=rng)
        devs = [abs(ans - expectation(rho, PauliString(w)))
                for w, ans in list(zip(phase1, a1)) + list(zip(phase2, a2))]
        worst = max(worst, max(devs))
        good += max(devs) <= eps

    # exact unbiasedness: sum_w p(w) q_P(w) equals tr(P rho)^2
    rng = np.random.default_rng(999)
    rho = _random_density(8, rng)
    probs = bell_probabilities(rho)
    words = np.array([[(w >> 4) & 3, (w >> 2) & 3, w & 3] for w in range(64)])
    unbiased = True
    for w in ("ZII", "XYZ", "ZZZ", "IYX", "XXI"):
        P = PauliString(w)
        lhs = float(probs @ q_p_values(words, P))
        unbiased = unbiased and abs(lhs - expectation(rho, P) ** 2) <= 1e-9

    elapsed = time.time() - t0
    ok = good >= 95 and unbiased and elapsed <= 60.0
    _report(ok, "adaptive Pauli streams",
            f"{good}/100 seeds within eps={eps} on all 100 queries "
            f"(need >= 95), worst deviation {worst:.3f}, exact mean identity: "
            f"{unbiased}, {elapsed:.0f}s")
