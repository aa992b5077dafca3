"""Hand-sized examples of the tax schedule and the betrayal predicates."""

from welfarenet.economy import TaxSchedule, compute_tax, marginal_tax
from welfarenet.game import BetrayalParams, check_group_betrayal, check_individual_betrayal

# %% the quick-deduction formula and the slice-by-slice sum agree everywhere
sched = TaxSchedule([0, 50, 200], [0.05, 0.10, 0.20])
print("quick deductions:", sched.quick_deductions)
for income in (10, 50, 120, 200, 500):
    print(f"income {income:>4}: tax {compute_tax(income, sched):7.3f}  by slices {marginal_tax(income, sched):7.3f}")

# a threshold exempts small incomes outright, so tax jumps at the threshold
exempt = TaxSchedule([0, 50, 200], [0.05, 0.10, 0.20], exemption_threshold=5)
print("tax just below / at the threshold:", compute_tax(4.99, exempt), compute_tax(5.0, exempt))

# %% one agent weighing whether to run with the pot
params = BetrayalParams(gamma=30, beta=3, theta=1, k=11)
aver, min_guarantee = 1.0, 20.0
pot = 120.0
for wealth, stake in [(10.0, 5.0), (10.0, 50.0), (40.0, 5.0), (-60.0, 2.0)]:
    verdict = check_individual_betrayal(wealth, stake, pot, params, aver, min_guarantee)
    print(f"wealth {wealth:6.1f} stake {stake:5.1f} pot {pot}: betray={verdict}")

# %% a coalition must clear beta times its combined stake, so two members
# who could each take the pot alone may fail together
member = (10.0, 25.0)
print("one member on pot 120:", check_individual_betrayal(*member, 120.0, params, aver, min_guarantee))
print("the pair on pot 120:  ", check_group_betrayal([member, member], 120.0, params, aver, min_guarantee))
print("the pair on pot 150:  ", check_group_betrayal([member, member], 150.0, params, aver, min_guarantee))
