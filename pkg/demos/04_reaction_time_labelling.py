"""From lane-departure reaction times to a balanced sample set.

A toy session alternates between alert stretches (quick responses) and
drowsy stretches (slow responses).  Each trial is labelled by comparing
its own RT and the 90 s average RT with the session's 5th-percentile RT;
the transitional trials in between are excluded.  Balancing then keeps
equally many alert and drowsy samples per subject.
"""

import numpy as np

from somno.data import Session, Trial, TrialLabel, compute_alert_rt, filter_and_balance, label_session

rng = np.random.default_rng(4)
trials = []
t = 0.0
for block in range(12):
    drowsy = block % 2 == 1
    for _ in range(15):
        rt = rng.uniform(2.0, 4.0) if drowsy else rng.uniform(0.5, 0.8)
        trials.append(Trial(t, rt, rng.normal(size=384)))
        t += rng.uniform(8, 12)
session = Session(7, trials, "toy")

print(f"alert RT (5th percentile): {compute_alert_rt(session):.3f} s")
labelled = label_session(session)
for lab in TrialLabel:
    print(f"{lab.name.lower():9s} {sum(lt.label == lab for lt in labelled)}")

res = filter_and_balance({7: [session]}, min_count=30)
print("kept per class:", res.counts)
