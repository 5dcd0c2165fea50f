"""fewtune: define multi-module LM programs and optimize their prompts and weights.

Programs compose language modules (declarative input->output contracts
rendered as field-template prompts) with code control procedures. Two
optimizers operate on self-generated traces: a random search over few-shot
demo subsets for the prompt side, and bootstrapped fine-tuning datasets fed
to a trainer contract for the weight side. A strategy scheduler alternates
them, with prompt -> weight -> prompt as the flagship schedule.
"""

from .backends import (
    HttpBackend,
    HttpBackendConfig,
    InferenceParams,
    MockBackend,
    MockScript,
    ModelRef,
    default_inference_params,
)
from .bootstrap import TraceSet, bootstrap_traces, filter_traces
from .core import (
    Demo,
    Example,
    Field,
    LanguageModule,
    LmEnvironment,
    LmProgram,
    Metric,
    Signature,
    Trace,
    TraceStep,
    evaluate,
    make_signature,
    run_program,
    save_trace_store,
)
from .errors import (
    BudgetExceededError,
    DataError,
    EmptyDatasetError,
    EmptyProgramError,
    FewtuneError,
    InsufficientDataError,
    InsufficientExamplesError,
    MockMissError,
    ParseFailureError,
    ProgramRunError,
    SignatureError,
    ToolUnavailableError,
    TrainerFailedError,
    TransportError,
    UnknownStrategyError,
)
from .fewshot_search import (
    BfrsConfig,
    CandidateAssignment,
    bfrs,
    construct_fewshot_prompts,
    sample_fewshot_subsets,
    split_train_val,
)
from .finetune import (
    CliTrainer,
    FinetuneRecord,
    LoraHyperparams,
    StubTrainer,
    TrainerJob,
    bft,
    build_finetune_dataset,
    export_dataset,
)
from .formatting import (
    RenderedPrompt,
    parse_completion,
    render_completion,
    render_context,
    render_prompt,
)
from .strategy import (
    STRATEGY_MENU,
    StrategyOutcome,
    StrategyPlan,
    StrategyRunConfig,
    parse_strategy,
    run_strategy,
)

__version__ = "0.1.0"
