from .test_cli import TestCli # type: ignore
from .test_compose import TestCompose # type: ignore
from .test_confidence import TestConfidence # type: ignore
from .test_contract import TestContract # type: ignore
from .test_dsl import TestDsl # type: ignore
from .test_evaluate import TestEvaluate # type: ignore
from .test_logic import TestLogic # type: ignore
from .test_monitor import TestMonitor # type: ignore
from .test_mutate import TestMutate # type: ignore
from .test_rover import TestRover # type: ignore
from .test_styling import TestStyling # type: ignore
