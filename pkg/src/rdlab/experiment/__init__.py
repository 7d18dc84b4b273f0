from .study import (
    EventLog,
    Payment,
    Session,
    Study,
    StudyConfig,
    create_study,
    replay,
)
from .service import StudyHost, create_app

__all__ = [
    "EventLog",
    "Payment",
    "Session",
    "Study",
    "StudyConfig",
    "StudyHost",
    "create_app",
    "create_study",
    "replay",
]
