"""Sample containers, reaction-time labelling and the synthetic EEG generator."""

from .container import (
    ALERT,
    DROWSY,
    N_POINTS,
    SAMPLE_RATE,
    EegSample,
    LabeledSet,
    edd_bytes,
    export_csv,
    import_csv,
    load_edd,
    parse_edd,
    save_edd,
)
from .labeling import (
    Session,
    Trial,
    TrialLabel,
    compute_alert_rt,
    compute_global_rt,
    filter_and_balance,
    label_session,
    label_trial,
)
from .synth import SynthSpec, read_annotations, synth_generate, write_annotations
