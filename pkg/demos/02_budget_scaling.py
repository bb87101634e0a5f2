"""Accuracy versus total inference budget, all policies on one seeded world.

The controller allocates calls adaptively (prune weak branches, stop on
confident ones), so its accuracy should climb fastest as the budget grows.
Note that plurality voting is unusually strong on this toy world: wrong
answers concentrate on two distractors per problem, which is kind to
majority vote; the interesting comparison is against blind tree search,
which spends the same budget without process-aware control.
"""

from reasonctl import ControllerConfig, run_episode
from reasonctl.backends import SimBackend, SimWorld, SimWorldConfig
from reasonctl.baselines import best_of_n, greedy_cot, vanilla_tot
from reasonctl.budget import BudgetLedger

BUDGETS = (2, 4, 8, 16)
N_PROBLEMS = 150

world = SimWorld(SimWorldConfig(seed=11, step_error_prob=0.3))
backend = SimBackend(world)
problems = world.make_problems(N_PROBLEMS)


def accuracy(policy) -> float:
    hits = 0
    for problem in problems:
        result = policy(problem)
        hits += int((not result.abstained) and result.answer == problem.gold)
    return hits / len(problems)


def controller_at(budget):
    cfg = ControllerConfig(budget=budget)
    return lambda p: run_episode(p.view(), backend, cfg, BudgetLedger(budget),
                                 episode_id=p.id, seed=0)


def best_of_at(budget):
    return lambda p: best_of_n(p.view(), backend, BudgetLedger(budget),
                               episode_id=p.id, seed=0, n=budget)


def tot_at(budget):
    return lambda p: vanilla_tot(p.view(), backend, BudgetLedger(budget),
                                 episode_id=p.id, seed=0)


greedy_acc = accuracy(lambda p: greedy_cot(p.view(), backend, BudgetLedger(16),
                                           episode_id=p.id, seed=0))
print(f"{'C':>4s} {'greedy':>8s} {'best-of-N':>10s} {'blind tree':>11s} {'controller':>11s}")
for budget in BUDGETS:
    row = (greedy_acc, accuracy(best_of_at(budget)), accuracy(tot_at(budget)),
           accuracy(controller_at(budget)))
    print(f"{budget:>4d} " + " ".join(f"{v:>{w}.3f}" for v, w in
                                      zip(row, (8, 10, 11, 11))))
print("\n(greedy always spends exactly 1 call, shown for reference on every row)")
