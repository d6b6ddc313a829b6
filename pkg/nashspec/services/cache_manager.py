"""
估计模型缓存
同一环境、同一 K、同一种子只估计一次；条目只写一次、永不过期
"""

import hashlib
import json
import pickle
from abc import ABC, abstractmethod
from datetime import datetime
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Union

from loguru import logger

from config.settings import settings


def model_cache_key(fingerprint: str, samples_per_pair: int, seed: int) -> str:
    """估计模型的缓存键"""
    return f"model:{fingerprint}:K={samples_per_pair}:seed={seed}"


class CacheBackend(ABC):
    """缓存后端抽象基类"""

    @abstractmethod
    def get(self, key: str) -> Optional[Any]:
        """获取缓存值"""

    @abstractmethod
    def put(self, key: str, value: Any) -> bool:
        """写入缓存值；键已存在时不覆盖并返回 False"""

    @abstractmethod
    def exists(self, key: str) -> bool:
        """检查键是否存在"""

    @abstractmethod
    def keys(self) -> List[str]:
        """获取所有键"""

    @abstractmethod
    def clear(self) -> None:
        """清空所有缓存"""


class MemoryCache(CacheBackend):
    """进程内缓存"""

    def __init__(self):
        self._cache: Dict[str, Any] = {}

    def get(self, key: str) -> Optional[Any]:
        return self._cache.get(key)

    def put(self, key: str, value: Any) -> bool:
        if key in self._cache:
            return False
        self._cache[key] = value
        return True

    def exists(self, key: str) -> bool:
        return key in self._cache

    def keys(self) -> List[str]:
        return list(self._cache)

    def clear(self) -> None:
        self._cache.clear()


class FileCache(CacheBackend):
    """pickle 文件缓存，index.json 记录键与创建时间"""

    def __init__(self, cache_dir: str = "cache"):
        self.cache_dir = Path(cache_dir)
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        self.index_file = self.cache_dir / "index.json"
        self._load_index()

    def _load_index(self) -> None:
        try:
            if self.index_file.exists():
                with open(self.index_file, "r", encoding="utf-8") as f:
                    self._index = json.load(f)
            else:
                self._index = {}
        except Exception as e:
            logger.warning(f"加载缓存索引失败: {e}")
            self._index = {}

    def _save_index(self) -> None:
        try:
            with open(self.index_file, "w", encoding="utf-8") as f:
                json.dump(self._index, f, ensure_ascii=False, indent=2)
        except Exception as e:
            logger.error(f"保存缓存索引失败: {e}")

    def _get_file_path(self, key: str) -> Path:
        key_hash = hashlib.md5(key.encode()).hexdigest()
        return self.cache_dir / f"{key_hash}.pkl"

    def get(self, key: str) -> Optional[Any]:
        if key not in self._index:
            return None
        file_path = self._get_file_path(key)
        if not file_path.exists():
            del self._index[key]
            self._save_index()
            return None
        try:
            with open(file_path, "rb") as f:
                return pickle.load(f)
        except Exception as e:
            logger.error(f"读取缓存文件失败: {e}")
            return None

    def put(self, key: str, value: Any) -> bool:
        if self.exists(key):
            return False
        file_path = self._get_file_path(key)
        try:
            with open(file_path, "wb") as f:
                pickle.dump(value, f)
            self._index[key] = {
                "created_at": datetime.now().isoformat(),
                "file_path": str(file_path),
            }
            self._save_index()
            return True
        except Exception as e:
            logger.error(f"保存缓存文件失败: {e}")
            if file_path.exists():
                file_path.unlink()
            return False

    def exists(self, key: str) -> bool:
        return key in self._index and self._get_file_path(key).exists()

    def keys(self) -> List[str]:
        return [key for key in self._index if self._get_file_path(key).exists()]

    def clear(self) -> None:
        for key in list(self._index):
            file_path = self._get_file_path(key)
            if file_path.exists():
                file_path.unlink()
        self._index = {}
        self._save_index()


class CacheManager:
    """缓存管理器"""

    def __init__(self, backend: Union[str, CacheBackend] = "memory", **backend_kwargs):
        """
        初始化缓存管理器

        Args:
            backend: 缓存后端类型 ("memory", "file") 或实例
            **backend_kwargs: 后端特定参数
        """
        if isinstance(backend, str):
            if backend == "memory":
                self.backend = MemoryCache()
            elif backend == "file":
                self.backend = FileCache(**backend_kwargs)
            else:
                raise ValueError(f"不支持的缓存后端: {backend}")
        else:
            self.backend = backend
        self.hits = 0
        self.misses = 0
        logger.debug(f"缓存管理器初始化完成，后端: {type(self.backend).__name__}")

    def get(self, key: str) -> Optional[Any]:
        value = self.backend.get(key)
        if value is None:
            self.misses += 1
            logger.debug(f"缓存未命中: {key}")
        else:
            self.hits += 1
            logger.debug(f"缓存命中: {key}")
        return value

    def put(self, key: str, value: Any) -> bool:
        stored = self.backend.put(key, value)
        if not stored:
            logger.debug(f"缓存键已存在，保留原值: {key}")
        return stored

    def exists(self, key: str) -> bool:
        return self.backend.exists(key)

    def keys(self) -> List[str]:
        return self.backend.keys()

    def clear(self) -> None:
        self.backend.clear()
        logger.info("缓存已清空")

    def get_or_set(self, key: str, factory_func: Callable[[], Any]) -> Any:
        """
        获取缓存值，不存在时调用工厂函数生成并写入

        Args:
            key: 缓存键
            factory_func: 生成缓存值的函数

        Returns:
            缓存值
        """
        value = self.get(key)
        if value is not None:
            return value
        value = factory_func()
        self.put(key, value)
        return value

    def stats(self) -> Dict[str, Any]:
        keys = self.keys()
        return {
            "backend_type": type(self.backend).__name__,
            "total_keys": len(keys),
            "hits": self.hits,
            "misses": self.misses,
        }


_global_cache: Optional[CacheManager] = None


def get_cache_manager() -> CacheManager:
    """获取全局缓存管理器，后端由配置决定"""
    global _global_cache
    if _global_cache is None:
        if settings.cache_backend == "file":
            _global_cache = CacheManager("file", cache_dir=settings.cache_dir)
        else:
            _global_cache = CacheManager("memory")
    return _global_cache


def init_cache_manager(backend: Union[str, CacheBackend] = "memory", **backend_kwargs) -> CacheManager:
    """重新初始化全局缓存管理器"""
    global _global_cache
    _global_cache = CacheManager(backend, **backend_kwargs)
    return _global_cache
