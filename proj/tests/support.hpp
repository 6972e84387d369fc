#pragma once

#include "fixtures.hpp"

#include <gtest/gtest.h>
