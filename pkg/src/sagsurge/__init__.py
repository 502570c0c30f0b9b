"""Software twin of a residential voltage sag/surge detector."""

from .detector import (Action, Classification, Detector, DetectorConfig, DetectorState,
                       DisturbanceEvent, Led, Mode, Relay, classify, run, step)
from .frontend import (AdcCode, Acquisition, FrontendConfig, HeadroomWarning, acquire,
                       condition, quantize, reconstruct)
from .pipeline import Simulation, simulate, telemetry_bytes
from .rms import (Formula, HalfCycleRms, HalfCycleWindow, RmsConfig, RmsEngine, SyncMode,
                  compute_rms, measure)
from .telemetry import (EventClass, EventFrame, EventKind, SampleFrame, crc16, decode_stream,
                        encode_event_frame, encode_sample_frame)
from .waveform import (Disturbance, DisturbanceKind, Harmonic, Scenario, ScenarioError,
                       envelope_rms, parse_scenario, sample_at, synthesize)

__version__ = "0.1.0"
