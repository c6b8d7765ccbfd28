from ._validators import (check_finite_positive, check_open_unit,
                          check_symmetric, check_same_grid, check_config)
