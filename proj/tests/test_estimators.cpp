#include "doctest.h"

#include "polymer2d/estimators.hpp"
