#pragma once

#include <advrisk/attacks.hpp>
#include <advrisk/bootstrap.hpp>
#include <advrisk/core.hpp>
#include <advrisk/detection.hpp>
#include <advrisk/error.hpp>
#include <advrisk/estimators.hpp>
#include <advrisk/io.hpp>
#include <advrisk/models.hpp>
#include <advrisk/pool.hpp>
#include <advrisk/random.hpp>
