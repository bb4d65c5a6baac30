export {
  COLUMNS,
  FORMAT_MAGIC,
  parseSweepTable,
  readSweepTable,
  schemes,
  series,
  SweepFormatError,
  type SweepRow,
  type SweepTable,
} from "./table.js";
export {
  collectSeries,
  escapeXml,
  FIGURE_KINDS,
  KIND_AXIS,
  niceTicks,
  renderFigure,
  type FigureKind,
  type FigurePoint,
  type FigureSeries,
} from "./figure.js";
export {
  main,
  parseCliArgs,
  runRender,
  type RenderRequest,
} from "./cli.js";
