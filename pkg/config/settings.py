"""
配置管理模块
使用pydantic-settings管理均衡搜索、验证与基线的默认超参数
"""

from typing import Literal, Optional
from pydantic import Field
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """应用配置类"""

    # 随机种子
    seed: Optional[int] = Field(
        default=None,
        description="全局随机种子，设置后覆盖实验配置中的种子"
    )

    # Nash与验证配置
    nash_epsilon: float = Field(
        default=0.06,
        description="Nash因子ε"
    )

    precision_delta: float = Field(
        default=0.01,
        description="验证精度δ，必须满足 0 < δ < ε"
    )

    failure_prob: float = Field(
        default=0.1,
        description="模型估计失败概率p，仅用于公式计算K"
    )

    k_mode: Literal["fixed", "formula"] = Field(
        default="fixed",
        description="每个状态动作对的采样次数K的取值方式"
    )

    k_samples: int = Field(
        default=1000,
        description="固定模式下的采样次数K"
    )

    score_samples: int = Field(
        default=10000,
        description="验证时估计J_j的蒙特卡洛轨迹数"
    )

    # 枚举配置
    edge_budget: int = Field(
        default=20000,
        description="每条边策略的训练采样步数C"
    )

    q_epsilon: float = Field(
        default=0.15,
        description="Q学习ε-贪心探索率"
    )

    q_learning_rate: float = Field(
        default=0.1,
        description="Q学习学习率"
    )

    q_discount: float = Field(
        default=0.9,
        description="Q学习折扣因子"
    )

    reach_samples: int = Field(
        default=500,
        description="估计到达分布的轨迹数"
    )

    welfare_samples: int = Field(
        default=1000,
        description="估计候选策略社会福利的轨迹数"
    )

    max_paths: int = Field(
        default=5000,
        description="每个乘积图最多枚举的路径数"
    )

    # 规模上限
    max_dfa_states: int = Field(
        default=4096,
        description="确定化自动机的状态数上限"
    )

    max_model_states: int = Field(
        default=200000,
        description="模型估计时探索的环境状态数上限"
    )

    max_game_states: int = Field(
        default=2000000,
        description="惩罚博弈乘积状态数上限"
    )

    # 求解器配置
    solver_tolerance: float = Field(
        default=1e-9,
        description="矩阵博弈求解的数值容差"
    )

    # 基线配置
    maqrm_steps: int = Field(
        default=200000,
        description="MAQRM训练采样步数"
    )

    best_response_steps: int = Field(
        default=50000,
        description="ε_min中最优响应Q学习的采样步数"
    )

    epsilon_min_samples: int = Field(
        default=2000,
        description="ε_min中估计收益的轨迹数"
    )

    # 基准测试配置
    run_timeout_seconds: int = Field(
        default=7200,
        description="单次运行超时时间（秒）"
    )

    bench_runs: int = Field(
        default=10,
        description="每个(规约, 算法)组合的重复运行次数"
    )

    workers: int = Field(
        default=1,
        description="并行运行的进程数"
    )

    output_dir: str = Field(
        default="results",
        description="结果输出目录"
    )

    # 缓存配置
    cache_backend: Literal["memory", "file"] = Field(
        default="memory",
        description="估计模型缓存后端"
    )

    cache_dir: str = Field(
        default="cache",
        description="文件缓存目录"
    )

    # 日志配置
    log_level: str = Field(
        default="INFO",
        description="日志级别"
    )

    log_file: str = Field(
        default="logs/nashspec.log",
        description="日志文件路径"
    )

    class Config:
        """配置类设置"""
        env_prefix = "NASHSPEC_"
        env_file = ".env"
        env_file_encoding = "utf-8"
        case_sensitive = False
        extra = "ignore"


# 全局配置实例
settings = Settings()


def get_settings() -> Settings:
    """获取配置实例"""
    return settings


# 配置验证函数
def validate_config() -> bool:
    """验证配置是否合法"""
    errors = []

    if not 0 < settings.precision_delta < settings.nash_epsilon:
        errors.append("精度δ必须满足 0 < δ < ε")

    if not 0 < settings.failure_prob < 1:
        errors.append("失败概率p必须在0-1之间")

    if settings.k_samples < 1:
        errors.append("采样次数K必须至少为1")

    if not 0 <= settings.q_epsilon <= 1:
        errors.append("探索率必须在0-1之间")

    if not 0 < settings.q_learning_rate <= 1:
        errors.append("学习率必须在(0, 1]之间")

    if not 0 <= settings.q_discount <= 1:
        errors.append("折扣因子必须在0-1之间")

    for name in ("edge_budget", "reach_samples", "welfare_samples", "score_samples", "max_paths"):
        if getattr(settings, name) <= 0:
            errors.append(f"{name} 必须大于0")

    if settings.workers < 1:
        errors.append("并行进程数必须至少为1")

    if settings.run_timeout_seconds <= 0:
        errors.append("运行超时时间必须大于0")

    if errors:
        print("配置验证失败:")
        for error in errors:
            print(f"  - {error}")
        return False

    return True


def print_config():
    """打印当前配置"""
    print("当前配置:")
    print(f"  随机种子: {settings.seed if settings.seed is not None else '未设置'}")
    print(f"  Nash因子ε: {settings.nash_epsilon}")
    print(f"  验证精度δ: {settings.precision_delta}")
    print(f"  采样次数K: {settings.k_samples} ({settings.k_mode})")
    print(f"  边训练步数C: {settings.edge_budget}")
    print(f"  Q学习参数: ε={settings.q_epsilon}, lr={settings.q_learning_rate}, γ={settings.q_discount}")
    print(f"  福利估计轨迹数: {settings.welfare_samples}")
    print(f"  运行超时: {settings.run_timeout_seconds}秒")
    print(f"  缓存后端: {settings.cache_backend}")
    print(f"  日志级别: {settings.log_level}")


if __name__ == "__main__":
    print_config()
    print(f"\n配置验证: {'通过' if validate_config() else '失败'}")
