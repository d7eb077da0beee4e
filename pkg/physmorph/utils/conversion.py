import hashlib

import orjson


def md5_hash(d):
    """Hash any structure!
    No Security because we use it only to get a unique id.
    """
    return hashlib.md5(orjson_dumps(d)).hexdigest()  # nosec


def orjson_dumps(v, *, default=None, indent: bool = False):
    option = orjson.OPT_NON_STR_KEYS | orjson.OPT_SERIALIZE_NUMPY | orjson.OPT_SORT_KEYS
    if indent:
        option |= orjson.OPT_INDENT_2
    return orjson.dumps(v, default=default, option=option)
