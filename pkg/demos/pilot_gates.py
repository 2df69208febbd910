"""Go/no-go pilot on a corpus with a health signal and on one without."""

from triage.evaluation import draw_pilot, pilot_gates
from triage.outcomes import AsymmetryParams, generate_corpus

for label, params in [("asymmetric", AsymmetryParams()), ("null", AsymmetryParams.null())]:
    corpus = generate_corpus(300, params=params, seed=3)
    report = pilot_gates(corpus)
    print(f"{label:<10} {'GO' if report.go else 'NO-GO':<6} "
          f"light pass rate {report.cost.observed:.3f} (> {report.cost.threshold:.3f}?)  "
          f"p_hat {report.signal.observed:.3f} (>= {report.signal.threshold}?)")

# the nominal pilot is a seeded 50-task sample
sample = draw_pilot(generate_corpus(300, seed=3), seed=0)
report = pilot_gates(sample)
print(f"50-task pilot: {'GO' if report.go else 'NO-GO'}, notes={report.notes}")
