from dataclasses import dataclass
from typing import List, Optional, Sequence


class BenchLatticeError(Exception):
    """Base class for every domain error raised by the backend."""


class TaxonomyError(BenchLatticeError):
    code = "taxonomy"

    def __init__(self, message: str, location: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.location = location


class UnknownDimension(TaxonomyError):
    code = "unknown-dimension"


class ElementOnNonLeaf(TaxonomyError):
    code = "element-on-non-leaf"


class EmptyLeaf(TaxonomyError):
    code = "empty-leaf"


class DuplicateId(TaxonomyError):
    code = "duplicate-id"


class AlreadySubstantiated(TaxonomyError):
    code = "already-substantiated"


class ParentHoldsElements(TaxonomyError):
    code = "parent-holds-elements"


class EmptySubNames(TaxonomyError):
    code = "empty-sub-names"


class InvalidCharacteristics(TaxonomyError):
    code = "invalid-characteristics"


class ConfigurationError(BenchLatticeError):
    pass


class CombinatorialLimitExceeded(ConfigurationError):
    def __init__(self, count: int, cap: int):
        super().__init__(
            f"{count} configurations exceed the enumeration cap of {cap}; "
            "use counting or streaming instead"
        )
        self.count = count
        self.cap = cap


class ForeignConfiguration(ConfigurationError):
    pass


class TestCaseError(BenchLatticeError):
    __test__ = False  # not a unittest/pytest class

    def __init__(self, message: str, test_case_id: Optional[str] = None):
        super().__init__(message)
        self.test_case_id = test_case_id


class MissingLayer(TestCaseError):
    pass


class NoEvaluationCriteria(TestCaseError):
    pass


class NonPositiveDuration(TestCaseError):
    pass


class MissingPurpose(TestCaseError):
    pass


class ContradictoryOverride(TestCaseError):
    pass


class MalformedTestCase(TestCaseError):
    """A movable object or criterion field has the wrong type or range."""


class AssignmentError(BenchLatticeError):
    pass


class InstanceTooLarge(AssignmentError):
    pass


class InvalidBudget(AssignmentError):
    pass


class ChartStyleError(BenchLatticeError):
    pass


@dataclass(frozen=True)
class RegistryIssue:
    location: str
    code: str
    message: str

    def __str__(self) -> str:
        return f"{self.location}: {self.message} [{self.code}]"


class RegistryError(BenchLatticeError):
    """Aggregated problems found while reading or writing a document."""

    def __init__(self, path: str, issues: Sequence[RegistryIssue]):
        self.path = path
        self.issues: List[RegistryIssue] = list(issues)
        lines = "\n".join(f"  {issue}" for issue in self.issues)
        super().__init__(f"{path}: {len(self.issues)} problem(s)\n{lines}")

    @property
    def location(self) -> str:
        return self.issues[0].location if self.issues else ""


class RegistrySyntaxError(RegistryError):
    pass


class SchemaError(RegistryError):
    pass


class RegistryValidationError(RegistryError):
    def __init__(self, path: str, bench_id: str, causes: Sequence[TaxonomyError], issues: Sequence[RegistryIssue]):
        self.bench_id = bench_id
        self.causes: List[TaxonomyError] = list(causes)
        super().__init__(path, issues)

    @property
    def cause(self) -> TaxonomyError:
        return self.causes[0]


class RegistryIoError(RegistryError):
    pass


class SuiteValidationError(RegistryError):
    def __init__(self, path: str, causes: Sequence[BenchLatticeError], issues: Sequence[RegistryIssue]):
        self.causes: List[BenchLatticeError] = list(causes)
        super().__init__(path, issues)
