"""
规约驱动的多智能体纳什均衡搜索模块
"""

__version__ = "0.1.0"
__author__ = "NashSpec Team"
__description__ = "基于任务规约的高社会福利ε-纳什均衡计算"
