"""
实验配置与结果数据模型
"""

import os
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, Field, computed_field, field_validator, model_validator

from config.settings import Settings, settings


class EnvConfig(BaseModel):
    """环境配置"""

    id: Literal["intersection", "single_lane", "gridworld"] = Field(..., description="环境编号")
    params: Dict[str, Any] = Field(default_factory=dict, description="环境构造参数")


class HyperOverrides(BaseModel):
    """实验级超参数覆盖，未给出的字段回落到全局配置"""

    nash_epsilon: Optional[float] = Field(None, description="Nash因子ε")
    precision_delta: Optional[float] = Field(None, description="验证精度δ")
    failure_prob: Optional[float] = Field(None, description="失败概率p")
    k_mode: Optional[Literal["fixed", "formula"]] = Field(None, description="K的取值方式")
    k_samples: Optional[int] = Field(None, description="固定K")
    score_samples: Optional[int] = Field(None, description="估计J_j的轨迹数")
    edge_budget: Optional[int] = Field(None, description="边训练步数C")
    q_epsilon: Optional[float] = Field(None, description="探索率")
    q_learning_rate: Optional[float] = Field(None, description="学习率")
    q_discount: Optional[float] = Field(None, description="折扣因子")
    reach_samples: Optional[int] = Field(None, description="到达分布轨迹数")
    welfare_samples: Optional[int] = Field(None, description="福利估计轨迹数")
    max_paths: Optional[int] = Field(None, description="路径数上限")
    max_dfa_states: Optional[int] = Field(None, description="DFA状态上限")
    max_model_states: Optional[int] = Field(None, description="模型状态上限")
    max_game_states: Optional[int] = Field(None, description="惩罚博弈状态上限")
    maqrm_steps: Optional[int] = Field(None, description="MAQRM训练步数")
    best_response_steps: Optional[int] = Field(None, description="最优响应训练步数")
    epsilon_min_samples: Optional[int] = Field(None, description="ε_min估计轨迹数")
    run_timeout_seconds: Optional[int] = Field(None, description="单次运行超时（秒）")


class Hyperparameters(BaseModel):
    """解析后的超参数：全局配置加实验覆盖"""

    nash_epsilon: float
    precision_delta: float
    failure_prob: float
    k_mode: Literal["fixed", "formula"]
    k_samples: int
    score_samples: int
    edge_budget: int
    q_epsilon: float
    q_learning_rate: float
    q_discount: float
    reach_samples: int
    welfare_samples: int
    max_paths: int
    max_dfa_states: int
    max_model_states: int
    max_game_states: int
    maqrm_steps: int
    best_response_steps: int
    epsilon_min_samples: int
    run_timeout_seconds: int

    @classmethod
    def resolve(
        cls, overrides: Optional[HyperOverrides] = None, base: Optional[Settings] = None
    ) -> "Hyperparameters":
        """以全局配置为底，叠加非空覆盖项"""
        base = base or settings
        values = {name: getattr(base, name) for name in cls.model_fields}
        if overrides is not None:
            values.update(overrides.model_dump(exclude_none=True))
        return cls(**values)

    @model_validator(mode="after")
    def check_ranges(self) -> "Hyperparameters":
        if not 0 < self.precision_delta < self.nash_epsilon:
            raise ValueError("精度δ必须满足 0 < δ < ε")
        if self.k_samples < 1:
            raise ValueError("K 至少为1")
        return self


class ExperimentConfig(BaseModel):
    """单次实验配置（JSON文件）"""

    name: str = Field("experiment", description="实验名称")
    env: EnvConfig = Field(..., description="环境")
    specs: List[str] = Field(..., description="每个智能体的规约：内联文本或 .spec 文件路径")
    horizon: Optional[int] = Field(None, description="时域，缺省使用环境默认值")
    algorithm: Literal["highnashsearch", "nvi", "maqrm"] = Field(
        "highnashsearch", description="算法"
    )
    hyper: HyperOverrides = Field(default_factory=HyperOverrides, description="超参数覆盖")
    seed: int = Field(0, description="随机种子")
    output: Optional[str] = Field(None, description="输出路径")

    @field_validator("specs")
    @classmethod
    def check_specs(cls, value: List[str]) -> List[str]:
        if not value:
            raise ValueError("至少需要一个智能体规约")
        return value

    def effective_seed(self) -> int:
        """NASHSPEC_SEED 优先于配置文件"""
        override = os.environ.get("NASHSPEC_SEED")
        if override is not None:
            return int(override)
        if settings.seed is not None:
            return settings.seed
        return self.seed

    def hyperparameters(self) -> Hyperparameters:
        return Hyperparameters.resolve(self.hyper)


class ScoreReport(BaseModel):
    """蒙特卡洛估计的各智能体满足概率"""

    scores: List[float] = Field(..., description="J_i")
    std_errors: List[float] = Field(default_factory=list, description="标准误")
    num_samples: int = Field(..., description="轨迹数")

    @property
    def welfare(self) -> float:
        return sum(self.scores) / len(self.scores) if self.scores else 0.0


class VerificationRow(BaseModel):
    """单个智能体的验证结果"""

    agent: int
    score: float = Field(..., description="J_j(π)")
    deviation: float = Field(..., description="估计的偏离值 deṽ_j")
    margin: float = Field(..., description="J_j + ε - δ - deṽ_j")
    passed: bool


class CandidateReport(BaseModel):
    """排序后候选策略的摘要"""

    rank: int
    coalition: List[int]
    path: List[str]
    welfare: float
    scores: List[float]


class RunResult(BaseModel):
    """一次运行的结果"""

    spec: str
    algorithm: str
    seed: int
    welfare: float = 0.0
    epsilon_min: float = 0.0
    scores: List[float] = Field(default_factory=list)
    enumeration_steps: int = 0
    verification_steps: int = 0
    wall_time: float = 0.0
    terminated: bool = True
    found: bool = True
    note: str = ""

    @computed_field
    @property
    def sample_steps(self) -> int:
        return self.enumeration_steps + self.verification_steps


class BenchmarkEntry(BaseModel):
    """内置基准目录中的一项"""

    description: str = ""
    env: EnvConfig
    horizon: int
    specs: List[str]

    def to_experiment(self, name: str, algorithm: str, seed: int, hyper: HyperOverrides) -> ExperimentConfig:
        return ExperimentConfig(
            name=name,
            env=self.env,
            specs=self.specs,
            horizon=self.horizon,
            algorithm=algorithm,
            hyper=hyper,
            seed=seed,
        )


class BenchmarkConfig(BaseModel):
    """bench 子命令的配置文件"""

    algorithms: List[Literal["highnashsearch", "nvi", "maqrm"]] = Field(
        default_factory=lambda: ["highnashsearch"], description="参与比较的算法"
    )
    runs: Optional[int] = Field(None, description="每个 (规约, 算法) 的运行次数，缺省使用 bench_runs")
    seed: int = Field(0, description="第 r 次运行的种子为 seed + r")
    hyper: HyperOverrides = Field(default_factory=HyperOverrides, description="超参数覆盖")
    workers: Optional[int] = Field(None, description="进程数，缺省使用全局配置")
    output_dir: Optional[str] = Field(None, description="输出目录")
