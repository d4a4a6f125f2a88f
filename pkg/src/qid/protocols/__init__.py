from .machines import KeyStore, ServerMachine, UserMachine, qidplus_recover, spot_check_passes
from .messages import Decision, FrameType, Reason
from .params import Mode, SessionParams, SpotCheck
from .runner import mutual_qid_run, qkd_run, run_session, session_rngs

__all__ = [
    "Decision", "FrameType", "KeyStore", "Mode", "Reason", "ServerMachine", "SessionParams",
    "SpotCheck", "UserMachine", "mutual_qid_run", "qidplus_recover", "qkd_run", "run_session",
    "session_rngs", "spot_check_passes",
]
