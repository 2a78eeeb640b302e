from setuptools import setup

if __name__ == '__main__':
    setup(
        name='bundleLib',
        version='0.1',
        package_dir={'':'src'},
        packages=['bundleLib'],
        package_data={'bundleLib':['fixtures/*.json']},
        install_requires=['numpy','scipy>=1.5','dxfwrite','matplotlib>=3.1'],
        entry_points={'console_scripts':['bundlelib=bundleLib.cli:main']},
    )
