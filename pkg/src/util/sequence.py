from dataclasses import dataclass
from typing import Any, List, Optional


@dataclass
class StepResult:
    outcome: Any
    done: bool


class Step:
    def tick(self) -> StepResult:
        """
        Run this step of the procedure. Set done to True in the result when the procedure should stop here;
        otherwise the sequence moves on to the next step.
        """
        raise NotImplementedError


class Sequence:
    """
    Runs steps in order until one reports done. Every outcome is kept, so callers can report the whole path
    and not only where it stopped.
    """
    def __init__(self, steps: List[Step]):
        self.steps = steps
        self.index = 0
        self.done = False
        self.outcomes: List[Any] = []

    def run(self) -> Optional[int]:
        """Returns the index of the step that stopped the sequence, or None if every step ran without stopping."""
        while self.index < len(self.steps):
            result = self.steps[self.index].tick()
            self.outcomes.append(result.outcome)
            if result.done:
                self.done = True
                return self.index
            self.index += 1
        return None
