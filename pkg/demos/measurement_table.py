"""
Re-running the measurement table at a thousandth of the budget
==============================================================

Each row of the measurement summary is simulated with its own dip
parameters and set delay. With 1/1000 of the recorded pair count the
CRB-limited precision is sqrt(1000) times worse, so the rows land at
precisions of tens of attoseconds.
"""
from hom_metrology.table import REFERENCE_ROWS, run_table

records, avg = run_table(REFERENCE_ROWS, budget_scale=1e-3, m_windows=10_000)
print(f"{'label':>11} {'n':>4} {'expected':>9} {'measured':>9} {'accuracy':>9} {'precision':>9}   (as)")
for r in records + [avg]:
    print(f"{r['label']:>11} {r['refractive_index']:>4} {r['expected_as']:9.2f} {r['measured_as']:9.2f} "
          f"{r['accuracy_as']:9.2f} {r['precision_as']:9.2f}")
