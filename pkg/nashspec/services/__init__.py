# 核心算法服务模块
