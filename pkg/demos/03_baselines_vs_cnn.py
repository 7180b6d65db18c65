"""Leave-one-subject-out comparison of the CNN with band-power classifiers.

The CNN gets one repeat of 12 epochs, so the numbers are indicative;
the command ``somno eval`` / ``somno baseline`` runs the full protocol.
"""

from somno import baselines, evaluation
from somno import model as mdl
from somno.data import SynthSpec, synth_generate

data = synth_generate(SynthSpec(n_subjects=5, samples_per_class=50, seed=3))
feats = baselines.feature_matrix(data.values)
base = [evaluation.run_baseline_experiment(data, m, feats) for m in baselines.CLASSIFIERS]
cnn = evaluation.run_cnn_experiment(data, mdl.ModelConfig(), mdl.TrainConfig(epochs=12), repeats=1)

epoch = cnn.peak_epoch()
print(f"CNN peak mean accuracy {cnn.mean_per_epoch()[epoch - 1]:.3f} at epoch {epoch}")
for b in base:
    t = evaluation.paired_ttest(cnn.subject_means(epoch), b.accuracy)
    print(f"{b.method:4s} mean {b.mean:.3f}   paired t = {t.t:6.2f}, p = {t.p:.3g}")
