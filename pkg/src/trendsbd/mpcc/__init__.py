from .controller import (
    COUPLED,
    UNCOUPLED,
    CouplingMode,
    LiaSubflowControl,
    MultipathSession,
    SubflowState,
    lia_decrease,
    lia_increase,
    on_sbd_signal,
    on_tick,
)
