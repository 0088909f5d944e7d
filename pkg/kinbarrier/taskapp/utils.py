import importlib

from django.conf import settings


class ConfigurationException(Exception):
    pass


def get_package_version_tuple(pkg_name, version_expr):
    """

    :param pkg_name: name of the package which is used in import statement
    :param version_expr: expression used to get the version from already imported module
    :return: version tuple
    """
    mod = importlib.import_module(pkg_name)

    version = eval(version_expr, {pkg_name: mod})

    version_tuple = version.split('.')

    try:
        major: int = int(version_tuple[0])
    except (ValueError, IndexError):
        raise ConfigurationException("Cannot determine major version of package '{}'. Full version string: {}"
                                     .format(pkg_name, version))

    try:
        minor: int = int(version_tuple[1])
    except (ValueError, IndexError):
        raise ConfigurationException("Cannot determine minor version of package '{}'. Full version string: {}"
                                     .format(pkg_name, version))

    try:
        micro: int = int(version_tuple[2].split('+')[0])  # because of version strings like '0.51.0+0.g2c488bd.dirty'
    except (ValueError, IndexError):
        micro = None

    return major, minor, micro


def get_tracked_versions():
    """Versions of all packages listed in settings.TRACKED_DEPENDENCIES.

    :return: dict package name -> version string "major.minor.micro"
    """
    versions = {}
    for pkg_name, version_expr in settings.TRACKED_DEPENDENCIES:
        major, minor, micro = get_package_version_tuple(pkg_name, version_expr)
        versions[pkg_name] = f"{major}.{minor}" if micro is None else f"{major}.{minor}.{micro}"
    return versions
