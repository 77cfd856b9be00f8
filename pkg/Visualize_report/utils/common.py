import re


def safe_stem(name):
    """安全地生成文件名（只保留字母、数字、下划线、点和连字符）"""
    return re.sub(r'[^\w.\-]', '_', str(name)) or "_"
