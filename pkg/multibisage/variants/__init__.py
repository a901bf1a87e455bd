# Copyright (C) 2016 Benoit Myard <myardbenoit@gmail.com>
# Released under the terms of the BSD license.

def get_variant(config, instantiate=True):
    name = 'multibisage.variants.' + config.variant
    fromlist = [
        'Variant'
    ]

    try:
        module = __import__(name, fromlist=fromlist, level=0)
    except ModuleNotFoundError as e:
        if e.name != name:
            raise

        raise AssertionError('unknown variant `%s`' % config.variant)

    if not instantiate:
        return module.Variant

    return module.Variant(config)
