#!/usr/bin/python3
# -*- coding: utf-8 -*-
from pkg_resources import parse_requirements
from setuptools import find_packages, setup

readme = open('README.md', 'r').read()
with open('requirements.txt') as handle:
    requirements = [str(req) for req in parse_requirements(handle)]

setup(
    name='popalloc',
    version='1.0.0',
    description='Partition, solve in parallel and coalesce large allocation problems',
    packages=find_packages(exclude=['tests']),
    install_requires=requirements,
    extras_require={'highs': ['scipy>=1.9'], 'test': ['pytest']},
    entry_points={'console_scripts': ['pop=popalloc.cli:main']},
    python_requires='>=3.8',
    long_description=readme,
    long_description_content_type='text/markdown',
    keywords=['optimization', 'linear programming', 'allocation', 'scheduling', 'traffic engineering'],
    classifiers=[
        'Operating System :: OS Independent',
        'Programming Language :: Python :: 3',
        'License :: OSI Approved :: BSD License',
    ]
)
