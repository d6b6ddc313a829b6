# 测试模块