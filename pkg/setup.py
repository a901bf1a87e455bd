# Copyright (C) 2016 Benoit Myard <myardbenoit@gmail.com>
# Released under the terms of the BSD license.

# To release a new version:
#
#   $ python setup.py sdist upload
#   $ python setup.py bdist_wheel upload

import re

from setuptools import setup

VERSION_RE = re.compile(r"__version__ = '(.*)'")


def version(filename):
    with open(filename) as file:
        source = file.read()

    return VERSION_RE.search(source).group(1)


def requirements(filename):
    with open(filename) as file:
        source = file.read()

    return source.split()


version = version('multibisage/__init__.py')
requirements = requirements('requirements.txt')


setup(
    name='multibisage',
    version=version,
    url='http://github.com/saalaa/multibisage',
    license='BSD',
    author='Benoit Myard',
    author_email='myardbenoit@gmail.com',
    description='Multi-bipartite-graph pin embeddings at desk scale',
    long_description='See README.md.',
    install_requires=requirements,
    extras_require={
        'test': ['pytest>=7.0']
    },
    python_requires='>=3.8',
    zip_safe=False,
    platforms='any',
    data_files=[
        ('assets', ['assets/desk.json', 'assets/production.json'])
    ],
    packages=[
        'multibisage',
        'multibisage.variants'
    ],
    entry_points={
        'console_scripts': [
            'multibisage = multibisage.cli:main'
        ]
    },
    classifiers=[
        'Topic :: Scientific/Engineering :: Artificial Intelligence',
        'Environment :: Console',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: BSD License',
        'Programming Language :: Python',
        'Programming Language :: Python :: 3'
    ]
)
