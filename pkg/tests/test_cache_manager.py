"""
模型缓存管理器测试
"""

import pytest

from nashspec.services.cache_manager import (
    CacheManager,
    FileCache,
    MemoryCache,
    get_cache_manager,
    init_cache_manager,
    model_cache_key,
)


class TestMemoryCache:
    """内存缓存测试"""

    def test_write_once(self):
        """测试键已存在时不覆盖"""
        cache = MemoryCache()
        assert cache.put("k", 1)
        assert not cache.put("k", 2)
        assert cache.get("k") == 1

    def test_clear(self):
        """测试清空"""
        cache = MemoryCache()
        cache.put("k", 1)
        cache.clear()
        assert cache.keys() == []
        assert not cache.exists("k")


class TestFileCache:
    """文件缓存测试"""

    def test_persists_across_instances(self, tmp_path):
        """测试新实例能读到已写入的条目"""
        FileCache(str(tmp_path)).put("model:abc", {"p": 0.5})
        cache = FileCache(str(tmp_path))
        assert cache.exists("model:abc")
        assert cache.get("model:abc") == {"p": 0.5}
        assert (tmp_path / "index.json").exists()

    def test_write_once(self, tmp_path):
        """测试文件缓存同样只写一次"""
        cache = FileCache(str(tmp_path))
        assert cache.put("k", [1])
        assert not cache.put("k", [2])
        assert cache.get("k") == [1]

    def test_missing_file_dropped(self, tmp_path):
        """测试数据文件被删除后条目失效"""
        cache = FileCache(str(tmp_path))
        cache.put("k", 1)
        for path in tmp_path.glob("*.pkl"):
            path.unlink()
        assert cache.get("k") is None
        assert cache.keys() == []

    def test_clear(self, tmp_path):
        """测试清空删除数据文件"""
        cache = FileCache(str(tmp_path))
        cache.put("a", 1)
        cache.put("b", 2)
        cache.clear()
        assert list(tmp_path.glob("*.pkl")) == []


class TestCacheManager:
    """缓存管理器测试"""

    def test_get_or_set_calls_factory_once(self):
        """测试工厂函数只在未命中时调用"""
        manager = CacheManager("memory")
        calls = []

        def factory():
            calls.append(1)
            return "model"

        assert manager.get_or_set("k", factory) == "model"
        assert manager.get_or_set("k", factory) == "model"
        assert len(calls) == 1
        assert manager.stats() == {
            "backend_type": "MemoryCache",
            "total_keys": 1,
            "hits": 1,
            "misses": 1,
        }

    def test_unknown_backend(self):
        """测试不支持的后端"""
        with pytest.raises(ValueError):
            CacheManager("redis")

    def test_global_manager(self, tmp_path):
        """测试重新初始化全局管理器"""
        manager = init_cache_manager("file", cache_dir=str(tmp_path))
        assert get_cache_manager() is manager
        assert isinstance(manager.backend, FileCache)

    def test_key_format(self):
        """测试缓存键包含指纹、K 与种子"""
        assert model_cache_key("abc", 20, 3) == "model:abc:K=20:seed=3"
