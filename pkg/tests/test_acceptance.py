"""Acceptance suite. Each check prints one PASS/FAIL line with the measured numbers.

Run with ``pytest tests/test_acceptance.py -v -s`` or ``python tests/test_acceptance.py``.
"""
import functools
import time

import numpy as np

from hood.data import LabeledBatch
from hood.encoder import TrainConfig, init_params, loss_and_gradient
from hood.experiment import central_plan, fake_ood_plan, kernel_plan, rescore, run_plan
from hood.independence import hsic_biased, hsic_linear_covariance, permutation_independence_test
from hood.kernels import KernelSpec
from hood.metrics import aupr, auroc, fpr_at_tpr
from hood.numerics import make_rng
from hood.scoring import appendix_bound_check

from gradcheck import max_rel_error
from oracles import aupr_steps, auroc_pairs, fpr_scan

SEEDS = (0, 1, 2, 3, 4)


def report(tag, ok, detail, seconds=None, limit=None):
    timing = "" if seconds is None else f" [{seconds:.1f}s" + ("" if limit is None else f" / {limit:g}s") + "]"
    print(f"{'PASS' if ok else 'FAIL'} {tag}: {detail}{timing}")
    return ok


def timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def check_linear_identity():
    def run():
        r = make_rng(101)
        worst = 0.0
        for _ in range(100):
            n, d1, d2 = r.integers(2, 33), r.integers(1, 9), r.integers(1, 9)
            z = r.standard_normal((n, d1))
            g = r.standard_normal((n, d2))
            z -= z.mean(axis=0)
            g -= g.mean(axis=0)
            a = hsic_biased(z, g, KernelSpec("linear")).value
            b = hsic_linear_covariance(z, g)
            worst = max(worst, abs(a - b) / max(abs(b), 1e-300))
        return worst

    worst, sec = timed(run)
    return report("C1 linear HSIC equals ||Z^T G||^2/(N-1)^2", worst < 1e-10 and sec < 1.0,
                  f"max rel err {worst:.2e} (< 1e-10)", sec, 1)


def check_gradients():
    cases = [
        ("ce_only", "rbf"), ("hood", "rbf"), ("hood", "linear"), ("oe_uniform", "rbf"), ("mmd", "rbf"),
    ]

    def run():
        r = make_rng(202)
        worst = {}
        for i in range(20):
            objective, kind = cases[i % len(cases)]
            n_in, d, c = int(r.integers(2, 5)), int(r.integers(2, 5)), int(r.integers(2, 4))
            params = init_params(d + 1, (5,), d, c, r, activation="tanh")
            batch = LabeledBatch(
                r.standard_normal((n_in, d + 1)), r.integers(0, c, n_in), 1.5 * r.standard_normal((2 * n_in, d + 1))
            )
            cfg = TrainConfig(lam=float(r.uniform(0.2, 2.0)), objective=objective, kernel=KernelSpec(kind, sigma=1.5))
            _, grads = loss_and_gradient(params, batch, cfg)
            key = f"{objective}/{kind}"
            worst[key] = max(worst.get(key, 0.0), max_rel_error(params, batch, cfg, grads))
        return worst

    worst, sec = timed(run)
    top = max(worst.values())
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    return report("C2 analytic vs finite-difference gradients", top < 1e-4 and sec < 30,
                  f"max rel err {top:.2e} (< 1e-4); {detail}", sec, 30)


def check_metric_oracles():
    def run():
        r = make_rng(303)
        worst = 0.0
        for _ in range(1000):
            n_in, n_out = int(r.integers(1, 26)), int(r.integers(1, 26))
            levels = int(r.integers(1, 6))
            s_in = r.integers(0, levels, n_in).astype(float)
            s_out = r.integers(0, levels, n_out).astype(float)
            data = (np.r_[s_in, s_out], np.r_[np.ones(n_in, bool), np.zeros(n_out, bool)])
            target = float(r.choice([0.95, 0.5, 1.0, float(r.uniform(0.05, 1.0))]))
            worst = max(
                worst,
                abs(fpr_at_tpr(data, target) - fpr_scan(s_in, s_out, target)),
                abs(auroc(data) - auroc_pairs(s_in, s_out)),
                abs(aupr(data) - aupr_steps(s_in, s_out)),
            )
        return worst

    worst, sec = timed(run)
    return report("C3 metrics match brute-force oracles", worst < 1e-12 and sec < 10,
                  f"max |diff| {worst:.1e} (< 1e-12) on 1000 tied instances", sec, 10)


def check_hsic_sanity():
    def run():
        r = make_rng(404)
        spec = KernelSpec(sigma=1.0)
        neg, asym = 0.0, 0.0
        for _ in range(200):
            n = int(r.integers(2, 30))
            z, g = r.standard_normal((n, 3)), r.standard_normal((n, 2))
            a, b = hsic_biased(z, g, spec).value, hsic_biased(g, z, spec).value
            neg, asym = min(neg, a), max(asym, abs(a - b))
        const = max(abs(hsic_biased(np.ones((12, 3)) * c, r.standard_normal((12, 2)), spec).value) for c in (0.0, 2.5))
        indep = dep = 0
        for t in range(100):
            z = r.standard_normal((40, 2))
            indep += permutation_independence_test(z, r.standard_normal((40, 2)), spec, 99, r).p_value > 0.05
            dep += permutation_independence_test(z, z, spec, 99, r).p_value <= 0.01
        return neg, asym, const, indep, dep

    (neg, asym, const, indep, dep), sec = timed(run)
    ok = neg >= -1e-12 and asym < 1e-12 and const < 1e-12 and indep >= 90 and dep == 100 and sec < 60
    return report("C4 HSIC estimator sanity", ok,
                  f"min {neg:.1e} (>= -1e-12), asym {asym:.1e} (< 1e-12), const {const:.1e}, "
                  f"independent p>0.05 {indep}/100 (>= 90), g=z p<=0.01 {dep}/100 (= 100)", sec, 60)


@functools.lru_cache(maxsize=None)
def central_run():
    plan = central_plan(SEEDS)
    cells = []
    t0 = time.perf_counter()
    table = run_plan(plan, cells)
    return plan, table, cells, time.perf_counter() - t0


def check_central():
    _, table, _, sec = central_run()
    hood, ce, mmd = (table.mean(n, "auroc") for n in ("hood+cor", "ce_only+msp", "mmd+msp"))
    names = ("hood+cor", "oe_uniform+msp", "mmd+msp", "ce_only+msp")
    hsic = np.array([[r.final_hsic for r in table.by_method(n)] for n in names])
    smallest = int(np.sum(np.all(hsic[0] < hsic[1:], axis=0)))
    ok = hood - ce >= 0.02 and hood - mmd >= 0.02 and smallest == len(SEEDS) and sec < 300
    return report("C5 central experiment", ok,
                  f"AUROC hood+cor {hood:.4f}, ce_only+msp {ce:.4f} (+{hood - ce:.3f}), mmd+msp {mmd:.4f} "
                  f"(+{hood - mmd:.3f}), need +0.02; hood HSIC smallest on {smallest}/{len(SEEDS)} seeds", sec, 300)


def check_cor_vs_msp():
    plan, _, cells, _ = central_run()
    method = plan.methods[0]
    hood = [c for c in cells if c.row.method == method.name]
    pairs = [(c.report.fpr95, rescore(plan, c, method, "msp").fpr95) for c in hood]
    wins = sum(a <= b for a, b in pairs)
    detail = ", ".join(f"{a:.3f}<={b:.3f}" if a <= b else f"{a:.3f}>{b:.3f}" for a, b in pairs)
    return report("C6 COR FPR95 <= MSP FPR95 on hood checkpoints", wins >= 4,
                  f"{wins}/{len(pairs)} seeds (>= 4): {detail}")


def check_lambda_zero():
    from hood.data import BundleConfig, make_gaussian_bundle
    from hood.encoder import train

    bundle = make_gaussian_bundle(BundleConfig(n_per_class=200, n_test_per_class=20, n_train_out=5000))
    a = train(TrainConfig(objective="hood", lam=0.0, epochs=10, seed=3), bundle).params
    b = train(TrainConfig(objective="ce_only", epochs=10, seed=3), bundle).params
    same = all(np.array_equal(x, y) for x, y in zip(a.arrays(), b.arrays()))
    return report("C7 lambda=0 hood is bit-identical to ce_only", same, f"identical={same}")


def check_appendix_bound():
    def run():
        r = make_rng(808)
        violations = implication_cases = implication_fail = 0
        for i in range(10_000):
            n, d = int(r.integers(1, 30)), int(r.integers(1, 10))
            z = r.standard_normal((n, d)) * r.uniform(0.1, 5.0)
            q = r.standard_normal(d)
            if i % 10 == 0:
                q = np.zeros(d)
            elif i % 10 == 1 and n > 1:
                z -= z.mean(axis=0)
            lhs, rhs, frob = appendix_bound_check(z, q)
            violations += lhs > rhs * (1 + 1e-12) + 1e-15
            if frob < 1e-20:
                implication_cases += 1
                implication_fail += lhs >= 1e-9
        return violations, implication_cases, implication_fail

    (viol, cases, fail), sec = timed(run)
    ok = viol == 0 and cases > 0 and fail == 0 and sec < 5
    return report("C8 appendix bound", ok,
                  f"lhs>rhs on {viol}/10000; frob<1e-20 on {cases} instances, lhs>=1e-9 on {fail}", sec, 5)


def check_kernels():
    _, central, _, _ = central_run()
    rbf = central.mean("hood+cor", "auroc")
    plan = kernel_plan(SEEDS, kinds=("linear", "imq"))
    table = run_plan(plan)
    got = {m.kernel: table.mean(m.name, "auroc") for m in plan.methods}
    ok = all(abs(v - rbf) <= 0.05 for v in got.values())
    detail = ", ".join(f"{k} {v:.4f} (|diff| {abs(v - rbf):.3f})" for k, v in got.items())
    return report("C9 kernel ablation within 0.05 of RBF", ok, f"rbf {rbf:.4f}; {detail}")


def check_fake_ood():
    table = run_plan(fake_ood_plan(SEEDS))
    fake, ce = table.mean("hood+fake+cor", "auroc"), table.mean("ce_only+msp", "auroc")
    return report("C10 hood on distorted inliers beats ce_only+msp", fake > ce,
                  f"AUROC hood+fake+cor {fake:.4f} vs ce_only+msp {ce:.4f}")


def test_c01_linear_identity():
    assert check_linear_identity()


def test_c02_gradients():
    assert check_gradients()


def test_c03_metric_oracles():
    assert check_metric_oracles()


def test_c04_hsic_sanity():
    assert check_hsic_sanity()


def test_c05_central_experiment():
    assert check_central()


def test_c06_cor_beats_msp_on_own_checkpoints():
    assert check_cor_vs_msp()


def test_c07_lambda_zero():
    assert check_lambda_zero()


def test_c08_appendix_bound():
    assert check_appendix_bound()


def test_c09_kernel_ablation():
    assert check_kernels()


def test_c10_fake_ood():
    assert check_fake_ood()


CHECKS = [
    check_linear_identity, check_gradients, check_metric_oracles, check_hsic_sanity, check_central,
    check_cor_vs_msp, check_lambda_zero, check_appendix_bound, check_kernels, check_fake_ood,
]

if __name__ == "__main__":
    results = [check() for check in CHECKS]
    print(f"{sum(results)}/{len(results)} criteria passed")
    raise SystemExit(0 if all(results) else 1)
