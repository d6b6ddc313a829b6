"""
异常类型定义
"""

from typing import Optional


class NashSpecError(Exception):
    """项目统一异常基类"""

    def __init__(self, message: str, code: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.code = code

    def __str__(self) -> str:
        if self.code:
            return f"[{self.code}] {self.message}"
        return self.message


class SpecSyntaxError(NashSpecError):
    """规约语法错误"""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (位置 {position})", code="SPEC_SYNTAX")
        self.position = position


class UnknownPredicateError(NashSpecError):
    """未知原子谓词"""

    def __init__(self, name: str):
        super().__init__(f"未定义的原子谓词: {name}", code="UNKNOWN_PREDICATE")
        self.name = name


class StateBudgetError(NashSpecError):
    """状态数超出上限"""

    def __init__(self, what: str, limit: int):
        super().__init__(f"{what}状态数超过上限 {limit}", code="STATE_BUDGET")
        self.limit = limit


class PathBudgetError(NashSpecError):
    """路径数超出上限"""

    def __init__(self, limit: int):
        super().__init__(f"乘积图路径数超过上限 {limit}", code="PATH_BUDGET")
        self.limit = limit


class CoalitionError(NashSpecError):
    """联盟参数非法"""


class PathError(NashSpecError):
    """乘积图路径非法"""


class EstimationError(NashSpecError):
    """模型估计失败"""


class ReachabilityError(NashSpecError):
    """边策略在采样中从未达成目标边"""


class SolverError(NashSpecError):
    """求解器内部错误"""


class NoEquilibriumError(NashSpecError):
    """一般和阶段博弈未找到均衡"""


class VerificationError(NashSpecError):
    """验证参数非法"""


class ConfigError(NashSpecError):
    """配置错误"""


class RunTimeoutError(NashSpecError):
    """运行超时"""
