"""agentry: composable agent behaviors on a deterministic multi-location
simulated runtime.

Importing the package registers every builtin action and predicate, so
behavior trees restored from serialized form or scenario files resolve out
of the box.
"""

from .actions import ActionDescriptor, ActionRegistry, builtin_action, builtin_predicate
from .adapter import PlatformAdapter
from .behaviors import (
    ACK,
    CYCLIC,
    ONE_SHOT,
    REQUEST,
    RESULT,
    CancelBehavior,
    Client,
    Listener,
    Observer,
    RequestEnvelope,
    RoleRegistry,
    Server,
    Task,
    assign_role,
    resolve_agent_ref,
    resolve_params,
)
from .composites import ALL, ANY, FSM_EVENT, Fsm, FsmDefinition, Parallel, Sequential
from .errors import (
    AgentryError,
    AlreadyMigrating,
    DuplicateAction,
    DuplicateLocationName,
    DuplicateRole,
    EmptyRoute,
    EmptyTypeTag,
    InvalidFsm,
    MalformedRepository,
    NoCallbacks,
    ReorderStartedChild,
    ScenarioError,
    SteppingDone,
    TickBudgetExceeded,
    UnknownAction,
    UnknownAgent,
    UnknownLocation,
    UnknownQuestionId,
    UnknownRole,
    ZeroPeriod,
)
from .exam_push import SUBMISSION, PushClientPlan, build_push_courier, run_exam_push
from .grading import (
    FILL_NUMERIC,
    FILL_TEXT,
    MULTIPLE_CHOICE,
    SINGLE_CHOICE,
    TRUE_FALSE,
    Exam,
    ExamReport,
    GradeResult,
    ProgressRecord,
    Question,
    SelfAssessment,
    Submission,
    Test,
    answer_matches,
    grade,
    parse_weight,
    weight_to_jsonable,
)
from .itinerary import (
    DelayEstimator,
    Early,
    Itinerary,
    ItineraryConfig,
    Late,
    Objective,
    OnTime,
    Route,
    classify_arrival,
    next_departure_plan,
    observe_and_update_delay,
)
from .mock import MockPlatform
from .model import (
    DONE,
    RUNNING,
    WILDCARD,
    AgentContext,
    AgentId,
    AnyOf,
    AtTime,
    Behavior,
    Blocked,
    Done,
    LocationId,
    Message,
    MigrationReport,
    Never,
    OnArrival,
    OnMessage,
    Running,
    StepOutcome,
    WakeCondition,
    behavior_from_dict,
    behavior_kinds,
    canonical_json,
    clone_behavior,
    make_message,
    message_matches,
)
from .repository import (
    find_test,
    load_progress,
    load_reports,
    load_tests,
    save_tests,
    store_progress,
    store_report,
)
from .scenario import build_platform, load_scenario, validate_scenario
from .self_assessment import (
    CMD,
    EndSession,
    GetTest,
    ListTests,
    SessionLog,
    SubmitResults,
    build_session_client,
    collect_session_log,
    self_assessment_session,
    setup_session_server,
    validate_script,
)
from .simulator import Fixed, PerLink, SimConfig, SimPlatform, UniformRange
from .trace import EventKind, TraceEvent, TraceLog

__version__ = "0.1.0"

__all__ = [
    "ACK",
    "ALL",
    "ANY",
    "CMD",
    "CYCLIC",
    "DONE",
    "FILL_NUMERIC",
    "FILL_TEXT",
    "FSM_EVENT",
    "MULTIPLE_CHOICE",
    "ONE_SHOT",
    "REQUEST",
    "RESULT",
    "RUNNING",
    "SINGLE_CHOICE",
    "SUBMISSION",
    "TRUE_FALSE",
    "WILDCARD",
    "ActionDescriptor",
    "ActionRegistry",
    "AgentContext",
    "AgentId",
    "AgentryError",
    "AlreadyMigrating",
    "AnyOf",
    "AtTime",
    "Behavior",
    "Blocked",
    "CancelBehavior",
    "Client",
    "DelayEstimator",
    "Done",
    "DuplicateAction",
    "DuplicateLocationName",
    "DuplicateRole",
    "Early",
    "EmptyRoute",
    "EmptyTypeTag",
    "EndSession",
    "EventKind",
    "Exam",
    "ExamReport",
    "Fixed",
    "Fsm",
    "FsmDefinition",
    "GetTest",
    "GradeResult",
    "InvalidFsm",
    "Itinerary",
    "ItineraryConfig",
    "Late",
    "ListTests",
    "Listener",
    "LocationId",
    "MalformedRepository",
    "Message",
    "MigrationReport",
    "MockPlatform",
    "Never",
    "NoCallbacks",
    "Objective",
    "Observer",
    "OnArrival",
    "OnMessage",
    "OnTime",
    "Parallel",
    "PerLink",
    "PlatformAdapter",
    "ProgressRecord",
    "PushClientPlan",
    "Question",
    "ReorderStartedChild",
    "RequestEnvelope",
    "RoleRegistry",
    "Route",
    "Running",
    "ScenarioError",
    "SelfAssessment",
    "Sequential",
    "Server",
    "SessionLog",
    "SimConfig",
    "SimPlatform",
    "StepOutcome",
    "SteppingDone",
    "Submission",
    "SubmitResults",
    "Task",
    "Test",
    "TickBudgetExceeded",
    "TraceEvent",
    "TraceLog",
    "UniformRange",
    "UnknownAction",
    "UnknownAgent",
    "UnknownLocation",
    "UnknownQuestionId",
    "UnknownRole",
    "ZeroPeriod",
    "answer_matches",
    "assign_role",
    "behavior_from_dict",
    "behavior_kinds",
    "build_platform",
    "build_push_courier",
    "build_session_client",
    "builtin_action",
    "builtin_predicate",
    "canonical_json",
    "classify_arrival",
    "clone_behavior",
    "collect_session_log",
    "find_test",
    "grade",
    "load_progress",
    "load_reports",
    "load_scenario",
    "load_tests",
    "make_message",
    "message_matches",
    "next_departure_plan",
    "observe_and_update_delay",
    "parse_weight",
    "resolve_agent_ref",
    "resolve_params",
    "run_exam_push",
    "save_tests",
    "self_assessment_session",
    "setup_session_server",
    "store_progress",
    "store_report",
    "validate_scenario",
    "validate_script",
    "weight_to_jsonable",
]
