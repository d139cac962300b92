export {
  FIGURE_KINDS,
  FigureKind,
  FigureMeta,
  RenderedFigure,
  renderCostBreakdown,
  renderCrossArch,
  renderFigure,
  renderRoundBreakdown,
  renderShardSweep,
  renderTradeoff,
} from "./figures.js";
export {
  IDLE_COLUMNS,
  IdleRow,
  SWEEP_COLUMNS,
  SchemaError,
  SweepRow,
  parseIdleCsv,
  parseSweepCsv,
} from "./csv.js";
